#include "doctest.h"

#include "emo/core/errors.hpp"
#include "emo/core/tensor.hpp"

#include <cmath>
#include <limits>

using emo::Tensor;

TEST_CASE("tensor size follows shape") {
  Tensor t({2, 3, 4}, 1.5);
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.dim(1) == 3);
  CHECK(t[23] == 1.5);
  CHECK(emo::shape_string(t.shape()) == "[2x3x4]");
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), emo::ShapeError);
}

TEST_CASE("reshape keeps values and rejects size change") {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.storage() == t.storage());
  CHECK(r.dim(0) == 3);
  CHECK_THROWS_AS(t.reshape({4, 2}), emo::ShapeError);
}

TEST_CASE("arithmetic and finiteness") {
  Tensor a({3}, std::vector<double>{1, 2, 3});
  Tensor b({3}, std::vector<double>{0.5, 0.5, 0.5});
  a += b;
  a *= 2.0;
  CHECK(a.storage() == std::vector<double>{3, 5, 7});
  CHECK(a.all_finite());
  a[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(a.all_finite());
  Tensor c({4});
  CHECK_THROWS_AS(c += b, emo::ShapeError);
  CHECK_THROWS_AS(emo::require_same_shape(b, c, "test"), emo::ShapeError);
}
