// Builds the amalgamated Catch2 runner once; test translation units link
// against this library.
#include <catch2/catch_amalgamated.cpp>
