#include <doctest.h>

#include <cmath>
#include <limits>

#include "maskanim/tensor.hpp"

using namespace maskanim;

TEST_CASE("shape arithmetic") {
  const Shape s{2, 3, 4, 5};
  CHECK(s.numel() == 120);
  CHECK(s.plane() == 20);
  CHECK(s.str() == "(2,3,4,5)");
}

TEST_CASE("tensor indexing follows NCHW") {
  Tensor t(Shape{2, 2, 2, 3});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(i);
  CHECK(t.at(0, 0, 0, 0) == 0.0f);
  CHECK(t.at(0, 0, 1, 2) == 5.0f);
  CHECK(t.at(0, 1, 0, 0) == 6.0f);
  CHECK(t.at(1, 0, 0, 0) == 12.0f);
  CHECK(t.plane(1, 1)[0] == 18.0f);
}

TEST_CASE("sample and stack are inverse") {
  Tensor t(Shape{3, 2, 2, 2});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(i) * 0.5f;
  std::vector<Tensor> parts{t.sample(0), t.sample(1), t.sample(2)};
  CHECK(parts[1].shape() == Shape{1, 2, 2, 2});
  CHECK(stack(parts) == t);
}

TEST_CASE("reductions") {
  Tensor t(Shape{1, 1, 1, 4}, std::vector<float>{-1.0f, 2.0f, 0.5f, 0.5f});
  CHECK(min_value(t) == -1.0f);
  CHECK(max_value(t) == 2.0f);
  CHECK(mean_value(t) == doctest::Approx(0.5));
  CHECK(all_finite(t));
  t.data()[2] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(all_finite(t));
}

TEST_CASE("content hash distinguishes single-bit changes") {
  Tensor a(Shape{1, 1, 4, 4}, 0.25f);
  Tensor b = a;
  CHECK(content_hash(a) == content_hash(b));
  b.data()[7] = std::nextafter(0.25f, 1.0f);
  CHECK(content_hash(a) != content_hash(b));
}

TEST_CASE("add_ requires matching shapes") {
  Tensor a(Shape{1, 1, 2, 2}, 1.0f);
  a.add_(Tensor(Shape{1, 1, 2, 2}, 2.0f));
  CHECK(a.at(0, 0, 1, 1) == 3.0f);
  CHECK_THROWS(a.add_(Tensor(Shape{1, 1, 1, 2}, 1.0f)));
}
