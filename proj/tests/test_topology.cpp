#include <catch2/catch_amalgamated.hpp>

#include "icemlp/topology.hpp"

using icemlp::NetworkTopology;
using icemlp::parameter_count;

TEST_CASE("parameter counts match the benchmark configurations") {
    CHECK(parameter_count(NetworkTopology{11, 3}) == 36);
    CHECK(parameter_count(NetworkTopology{11, 5, 3}) == 78);
    CHECK(parameter_count(NetworkTopology{11, 8, 5, 3}) == 159);
    CHECK(parameter_count(NetworkTopology{11, 11, 8, 5, 3}) == 291);
    CHECK(parameter_count(NetworkTopology{2, 2}) == 6);
}

TEST_CASE("invalid topologies are rejected") {
    CHECK_THROWS_AS(parameter_count(NetworkTopology{}), std::invalid_argument);
    CHECK_THROWS_AS(parameter_count(NetworkTopology{5}), std::invalid_argument);
    CHECK_THROWS_AS(parameter_count(NetworkTopology{3, 0, 2}), std::invalid_argument);
}

TEST_CASE("topology text round-trip") {
    const NetworkTopology t{11, 5, 3};
    CHECK(t.to_string() == "[11,5,3]");
    CHECK(NetworkTopology::parse("11,5,3") == t);
    CHECK(NetworkTopology::parse("[11, 5, 3]") == t);
    CHECK_THROWS_AS(NetworkTopology::parse("11,,3"), std::invalid_argument);
    CHECK_THROWS_AS(NetworkTopology::parse("11,-5,3"), std::invalid_argument);
    CHECK_THROWS_AS(NetworkTopology::parse("7"), std::invalid_argument);
}
