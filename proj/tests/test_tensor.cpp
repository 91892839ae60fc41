#include <stdexcept>

#include "adaqat/ops.hpp"
#include "adaqat/tensor.hpp"
#include "doctest.h"

using namespace adaqat;

TEST_CASE("construction and element access") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.rank() == 2);
  CHECK(z.size() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(1) == 3);
  for (int64_t i = 0; i < z.size(); ++i) CHECK(z.data()[i] == 0.0f);

  Tensor f = Tensor::full({4}, 2.5f);
  for (int64_t i = 0; i < 4; ++i) CHECK(f.data()[i] == 2.5f);

  Tensor v = Tensor::from({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(v.at({1, 0}) == 3.0f);
  CHECK(v.at({0, 1}) == 2.0f);
  CHECK_THROWS_AS(v.at({2, 0}), std::out_of_range);
  CHECK_THROWS_AS((void)Tensor::from({2, 2}, {1.0f}), std::invalid_argument);
  CHECK(v.shape_str() == "[2x2]");
}

TEST_CASE("scalar item") {
  Tensor s = Tensor::from({1}, {3.5f});
  CHECK(s.is_scalar());
  CHECK(s.item() == 3.5f);
  Tensor t = Tensor::zeros({2});
  CHECK_FALSE(t.is_scalar());
  CHECK_THROWS_AS(t.item(), std::logic_error);
}

TEST_CASE("copies share storage; clone does not") {
  Tensor a = Tensor::from({3}, {1.0f, 2.0f, 3.0f});
  Tensor b = a;
  b.data()[0] = 9.0f;
  CHECK(a.data()[0] == 9.0f);

  Tensor c = a.clone();
  c.data()[1] = 7.0f;
  CHECK(a.data()[1] == 2.0f);
  CHECK(c.shape() == a.shape());
}

TEST_CASE("parameters carry persistent gradient buffers") {
  Tensor p = Tensor::param({2}, {0.5f, -0.5f});
  CHECK(p.requires_grad());
  REQUIRE(p.has_grad());
  CHECK(p.grad()[0] == 0.0f);
  p.grad()[0] = 4.0f;
  p.zero_grad();
  CHECK(p.grad()[0] == 0.0f);

  Tensor plain = Tensor::zeros({2});
  CHECK_FALSE(plain.requires_grad());
  CHECK_FALSE(plain.has_grad());
}

TEST_CASE("backward accumulates through a recorded chain") {
  Tensor x = Tensor::param({3}, {1.0f, 2.0f, 3.0f});
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = scale(x, 2.0f);
    Tensor loss = sum(y);
    CHECK(tape.num_nodes() >= 2);
    tape.backward(loss);
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0f);

  // Second pass accumulates.
  {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(sum(x));
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 3.0f);
}

TEST_CASE("backward rejects non-scalar and unrecorded losses") {
  Tensor x = Tensor::param({2}, {1.0f, 2.0f});
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = scale(x, 1.0f);
  CHECK_THROWS_AS(tape.backward(y), std::logic_error);  // non-scalar

  Tensor detached = Tensor::from({1}, {1.0f});
  CHECK_THROWS_AS(tape.backward(detached), std::logic_error);
}

TEST_CASE("no-grad guard suppresses recording") {
  Tensor x = Tensor::param({2}, {1.0f, 2.0f});
  Tape tape;
  Tape::Scope scope(tape);
  const int before = tape.num_nodes();
  {
    NoGradGuard guard;
    Tensor y = sum(scale(x, 3.0f));
    CHECK(y.item() == 9.0f);
  }
  CHECK(tape.num_nodes() == before);
}

TEST_CASE("scopes nest and restore the previously active tape") {
  CHECK(Tape::active() == nullptr);
  Tape outer;
  {
    Tape::Scope s1(outer);
    CHECK(Tape::active() == &outer);
    Tape inner;
    {
      Tape::Scope s2(inner);
      CHECK(Tape::active() == &inner);
    }
    CHECK(Tape::active() == &outer);
  }
  CHECK(Tape::active() == nullptr);
}

TEST_CASE("detach produces a tape-free view of the same storage") {
  Tensor x = Tensor::param({2}, {1.0f, 2.0f});
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = scale(x, 2.0f);
  Tensor d = y.detach();
  CHECK_FALSE(d.tape_attached());
  CHECK(d.data() == y.data());
}

TEST_CASE("tape clear drops recorded nodes") {
  Tensor x = Tensor::param({2}, {1.0f, 2.0f});
  Tape tape;
  Tape::Scope scope(tape);
  Tensor l = sum(x);
  CHECK(tape.num_nodes() > 0);
  tape.clear();
  CHECK(tape.num_nodes() == 0);
}

TEST_CASE("shape_numel rejects bad extents") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK_THROWS_AS(shape_numel({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(shape_numel({-1, 3}), std::invalid_argument);
}
