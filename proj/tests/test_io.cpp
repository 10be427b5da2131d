#include "doctest.h"

#include "qpnls/io.hpp"

#include <cstring>
#include <sstream>

using namespace qpnls;

namespace {

BlockOperator random_operator(Rng& rng, int d, int J, int L) {
  BlockOperator A(d, J, L);
  for (auto& M : A.mats)
    for (int r = 0; r < M.rows(); ++r)
      for (int c = 0; c < M.cols(); ++c) M(r, c) = rng.complex_ball(1.0);
  return A;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("function dumps round trip bit-exactly") {
  Rng rng(17);
  TorusFunction u = make_conjugate_pair(random_function(rng, 1, 3, 1.5));
  /* salt with values that stress the formatting: denormals-adjacent
   * magnitudes, exact integers, negative zeros */
  u.at(0, {1, 0, 0}, 2) = cd(1.0, -0.0);
  u.at(1, {-3, 0, 0}, -3) = cd(3.141592653589793e-160, -2.0);

  std::stringstream ss;
  write_function(ss, u);
  const TorusFunction v = read_function(ss);
  CHECK(v.d == u.d);
  CHECK(v.N == u.N);
  CHECK(v.ncomp == u.ncomp);
  CHECK(v.tag == u.tag);
  REQUIRE(v.data.size() == u.data.size());
  CHECK(std::memcmp(v.data.data(), u.data.data(),
                    u.data.size() * sizeof(cd)) == 0);

  /* single component, real-valued tag */
  TorusFunction w = random_function(rng, 2, 2, 1.0);
  w.tag = Reality::real_valued;
  symmetrize_reality(w);
  std::stringstream ss2;
  write_function(ss2, w);
  const TorusFunction w2 = read_function(ss2);
  CHECK(w2.tag == Reality::real_valued);
  CHECK(std::memcmp(w2.data.data(), w.data.data(),
                    w.data.size() * sizeof(cd)) == 0);
}

TEST_CASE("the function header carries the box and the reality tag") {
  const TorusFunction u =
      TorusFunction::single_mode(1, 3, {2, 0, 0}, -1, cd(0.5, 0.25), 2, 1);
  std::stringstream ss;
  write_function(ss, u);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "1 3 2 complex");

  /* records are "l j re im" with all modes present */
  long records = 0;
  while (std::getline(ss, line))
    if (!line.empty()) ++records;
  CHECK(records == 2L * 7 * 7);
}

TEST_CASE("operator dumps round trip bit-exactly") {
  Rng rng(23);
  const BlockOperator A = random_operator(rng, 1, 2, 2);
  std::stringstream ss;
  write_operator(ss, A);
  const BlockOperator B = read_operator(ss);
  CHECK(B.d == A.d);
  CHECK(B.J == A.J);
  CHECK(B.L == A.L);
  REQUIRE(B.mats.size() == A.mats.size());
  for (std::size_t k = 0; k < A.mats.size(); ++k)
    CHECK((A.mats[k] - B.mats[k]).norm() == 0.0);
}

TEST_CASE("operator records are sorted by the full index key") {
  BlockOperator A(1, 1, 1);
  A.block({1, 0, 0})(A.row(0, -1), A.row(1, 0)) = cd(2.0, 0.0);
  A.block({-1, 0, 0})(A.row(1, 1), A.row(0, 0)) = cd(0.0, 3.0);
  std::stringstream ss;
  write_operator(ss, A);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "1 1 1");
  std::vector<std::string> recs;
  while (std::getline(ss, line))
    if (!line.empty()) recs.push_back(line);
  std::vector<std::string> sorted = recs;
  std::sort(sorted.begin(), sorted.end(),
            [](const std::string& a, const std::string& b) {
              std::istringstream ia(a), ib(b);
              long xa, xb;
              for (int k = 0; k < 5; ++k) {
                ia >> xa;
                ib >> xb;
                if (xa != xb) return xa < xb;
              }
              return false;
            });
  CHECK(recs == sorted);
  /* sigma = -1 rows precede sigma = +1 rows */
  CHECK(recs.front().substr(0, 2) == "-1");
}

TEST_CASE("malformed dumps are rejected with a parse error") {
  {
    std::stringstream ss("5 3 1 complex\n");
    CHECK_THROWS_AS(read_function(ss), UsageError);
  }
  {
    std::stringstream ss("1 3 2 widget\n");
    CHECK_THROWS_AS(read_function(ss), UsageError);
  }
  {
    /* truncated: header promises 1 component on N = 1 but one record */
    std::stringstream ss("1 1 1 complex\n0 0 1.0 2.0\n");
    CHECK_THROWS_AS(read_function(ss), UsageError);
  }
  {
    /* record outside the declared box */
    std::stringstream ss1("1 0 1 complex\n0 4 1.0 0.0\n");
    CHECK_THROWS_AS(read_function(ss1), UsageError);
  }
  {
    std::stringstream ss("1 -2 1\n");
    CHECK_THROWS_AS(read_operator(ss), UsageError);
  }
  CHECK_THROWS_AS(load_function("/nonexistent/path/f.txt"), UsageError);
}

TEST_CASE("path wrappers write and read through the filesystem") {
  Rng rng(29);
  const TorusFunction u = random_function(rng, 1, 2, 1.0);
  const std::string path = "io_roundtrip_test.txt";
  save_function(path, u);
  const TorusFunction v = load_function(path);
  CHECK(std::memcmp(v.data.data(), u.data.data(),
                    u.data.size() * sizeof(cd)) == 0);
  std::remove(path.c_str());
}

}  // TEST_SUITE io
