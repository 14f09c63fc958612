#include <doctest.h>

#include "htlab/wave.hpp"

TEST_CASE("placeholder_wave") { CHECK(true); }
