#include <doctest.h>

#include "htlab/fiber.hpp"

TEST_CASE("placeholder_fiber") { CHECK(true); }
