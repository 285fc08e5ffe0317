#include <doctest.h>

#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pulse/parallel.hpp"

using namespace pulse;

TEST_SUITE("parallel") {
  TEST_CASE("every index runs exactly once") {
    for (std::size_t threads : {1u, 2u, 4u}) {
      std::vector<int> hits(1000, 0);
      parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
      CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 1000);
      CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
    }
  }

  TEST_CASE("exceptions reach the caller") {
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                      if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
  }

  TEST_CASE("environment variable caps workers") {
    ::setenv("PULSE_SEQ_THREADS", "2", 1);
    CHECK(resolve_threads(8) == 2);
    CHECK(resolve_threads(0) == 2);
    CHECK(resolve_threads(1) == 1);
    ::unsetenv("PULSE_SEQ_THREADS");
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
  }
}
