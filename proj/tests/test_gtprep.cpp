#include "cellseg/errors.hpp"
#include "cellseg/gtprep.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cellseg;
using testing::Rng;

TEST_CASE("all background stays background") {
  const SemanticMap h = instance_to_semantic(InstanceMap::Zero(7, 9));
  CHECK((h == kBackground).all());
}

TEST_CASE("isolated instance has no touching pixels") {
  InstanceMap g = InstanceMap::Zero(20, 20);
  g.block(2, 2, 5, 5) = 1;
  g.block(2, 10, 5, 5) = 2;  // three columns apart, beyond k = 2
  const SemanticMap h = instance_to_semantic(g);
  CHECK_FALSE((h == kTouching).any());
  CHECK(((g > 0) == (h == kCell)).all());
}

TEST_CASE("abutting squares match the per-pixel rule") {
  InstanceMap g = InstanceMap::Zero(9, 14);
  g.block(2, 2, 5, 5) = 1;
  g.block(2, 7, 5, 5) = 2;
  const SemanticMap h = instance_to_semantic(g, NeighborhoodSpec(2));
  CHECK((h == testing::oracle_semantic(g, 2)).all());
  // Columns 5,6 of square 1 and 7,8 of square 2 see the other square.
  for (Index r = 2; r < 7; ++r) {
    CHECK(h(r, 4) == kCell);
    CHECK(h(r, 5) == kTouching);
    CHECK(h(r, 6) == kTouching);
    CHECK(h(r, 7) == kTouching);
    CHECK(h(r, 8) == kTouching);
    CHECK(h(r, 9) == kCell);
  }
}

TEST_CASE("a single foreign pixel is not enough") {
  InstanceMap g = InstanceMap::Zero(5, 5);
  g(2, 2) = 1;
  g(2, 3) = 2;
  const SemanticMap h = instance_to_semantic(g);
  CHECK(h(2, 2) == kCell);
  CHECK(h(2, 3) == kCell);
  g(3, 3) = 2;
  CHECK(instance_to_semantic(g)(2, 2) == kTouching);
}

TEST_CASE("semantic map matches the per-pixel rule on random scenes") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Index rows = testing::uniform_int(rng, 8, 64);
    const Index cols = testing::uniform_int(rng, 8, 64);
    const InstanceMap g = testing::random_instance_map(rng, rows, cols, testing::uniform_int(rng, 2, 8));
    for (int k = 1; k <= 3; ++k) {
      CHECK((instance_to_semantic(g, NeighborhoodSpec(k)) == testing::oracle_semantic(g, k)).all());
    }
  }
}

TEST_CASE("touching set grows with k and never reaches background") {
  Rng rng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const InstanceMap g = testing::random_instance_map(rng, 48, 48, 7);
    Mask previous = Mask::Constant(48, 48, false);
    for (int k = 1; k <= 4; ++k) {
      const SemanticMap h = instance_to_semantic(g, NeighborhoodSpec(k));
      const Mask touching = h == kTouching;
      CHECK_FALSE((touching && (g == 0)).any());
      CHECK_FALSE((previous && !touching).any());
      previous = touching;
    }
  }
}

TEST_CASE("relabelling instances leaves the semantic map unchanged") {
  Rng rng(13);
  const InstanceMap g = testing::random_instance_map(rng, 40, 40, 6);
  std::vector<Label> perm{0, 17, 3, 99, 4, 1000, 2};
  InstanceMap relabelled = g;
  for (Index i = 0; i < g.size(); ++i) relabelled.data()[i] = perm[static_cast<std::size_t>(g.data()[i])];
  CHECK((instance_to_semantic(g) == instance_to_semantic(relabelled)).all());
}

TEST_CASE("k below one is rejected") {
  CHECK_THROWS_AS(NeighborhoodSpec(0), ValidationError);
  CHECK_THROWS_AS(NeighborhoodSpec(-3), ValidationError);
}

TEST_CASE("negative labels are rejected") {
  InstanceMap g = InstanceMap::Zero(3, 3);
  g(1, 1) = -1;
  CHECK_THROWS_AS(instance_to_semantic(g), ValidationError);
}

TEST_CASE("one-hot encoding") {
  SemanticMap h(2, 2);
  h << 0, 1, 2, 1;
  const OneHotMap y = one_hot(h);
  REQUIRE(y.channels() == 3);
  CHECK(y[0].cast<int>().sum() == 1);
  CHECK(y[1].cast<int>().sum() == 2);
  CHECK(y[2].cast<int>().sum() == 1);

  const OneHotMap ones = one_hot(SemanticMap::Constant(3, 4, kCell));
  CHECK((ones[1] == 1).all());
  CHECK((ones[0] == 0).all());
  CHECK((ones[2] == 0).all());

  Rng rng(14);
  SemanticMap r(10, 10);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = static_cast<std::uint8_t>(testing::uniform_int(rng, 0, 2));
  const OneHotMap ry = one_hot(r);
  for (Index i = 0; i < r.size(); ++i) {
    int argmax = 0;
    for (int l = 1; l < 3; ++l) {
      if (ry[l].data()[i] > ry[argmax].data()[i]) argmax = l;
    }
    CHECK(argmax == r.data()[i]);
  }
}

TEST_CASE("class counts") {
  SemanticMap h(1, 4);
  h << 0, 1, 2, 1;
  const ClassCounts n = class_counts(h);
  CHECK(n[0] == 1);
  CHECK(n[1] == 2);
  CHECK(n[2] == 1);
  CHECK(class_counts(SemanticMap::Constant(3, 3, kCell))[kTouching] == 0);

  Rng rng(15);
  SemanticMap r(13, 7);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = static_cast<std::uint8_t>(testing::uniform_int(rng, 0, 2));
  CHECK(class_counts(r).total() == 91);

  SemanticMap bad = SemanticMap::Zero(2, 2);
  bad(0, 0) = 3;
  CHECK_THROWS_AS(class_counts(bad), ValidationError);
}
