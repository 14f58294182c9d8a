#include "aggmogp/error.hpp"
#include "aggmogp/geometry.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>

using namespace aggmogp;

namespace {

GridSpec integer_grid(double origin, std::size_t n) { return {{origin}, {1.0}, {n}}; }

Domain integer_domain(std::size_t n) {
  Domain d;
  d.id = "d";
  d.dimension = 1;
  d.extent = {{-0.5}, {static_cast<double>(n) - 0.5}};
  d.grid = integer_grid(0.0, n);
  return d;
}

Partition partition_of(std::vector<Support> supports) {
  Partition p;
  p.id = "p";
  p.attribute_id = "a";
  p.domain_id = "d";
  p.supports = std::move(supports);
  return p;
}

ErrorCode code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

} // namespace

TEST(Membership, IntervalIsHalfOpen) {
  const Support s{"s", "d", Interval{0.0, 4.0}};
  EXPECT_EQ(membership(s, integer_grid(0.0, 8)),
            (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Membership, CellSetIsIdentity) {
  const Support s{"s", "d", CellSet{{3, 7}}};
  EXPECT_EQ(membership(s, integer_grid(0.0, 8)), (std::vector<std::size_t>{3, 7}));
}

TEST(Membership, IntervalWithoutPointsIsEmpty) {
  const Support s{"s", "d", Interval{0.0, 0.4}};
  EXPECT_EQ(code_of([&] { membership(s, integer_grid(1.0, 8)); }),
            ErrorCode::EmptySupport);
}

TEST(Membership, PointMapsToItsCell) {
  const Support s{"s", "d", PointSite{{2.2}}};
  EXPECT_EQ(membership(s, integer_grid(0.0, 8)), (std::vector<std::size_t>{2}));
}

TEST(WeightVector, AverageSumCustom) {
  const GridSpec g = integer_grid(0.0, 8);
  const Support four{"s", "d", Interval{0.0, 4.0}};
  EXPECT_EQ(weight_vector(four, g, AggregationRule::average()),
            (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  const Support three{"s", "d", Interval{0.0, 3.0}};
  EXPECT_EQ(weight_vector(three, g, AggregationRule::sum()),
            (std::vector<double>{1, 1, 1}));
  const Support two{"s", "d", CellSet{{1, 5}}};
  EXPECT_EQ(weight_vector(two, g, AggregationRule::custom({0.7, 0.3})),
            (std::vector<double>{0.7, 0.3}));
  EXPECT_EQ(code_of([&] { weight_vector(two, g, AggregationRule::custom({1.0})); }),
            ErrorCode::LengthMismatch);
}

TEST(WeightVector, AverageSumsToOne) {
  const GridSpec g = integer_grid(0.0, 97);
  for (std::size_t n = 1; n < 97; n += 7) {
    const Support s{"s", "d", Interval{0.0, static_cast<double>(n)}};
    const auto w = weight_vector(s, g, AggregationRule::average());
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Validate, TouchingIntervalsAreAllowed) {
  const auto p = partition_of({{"x", "d", Interval{0, 2}}, {"y", "d", Interval{2, 4}}});
  EXPECT_NO_THROW(validate(integer_domain(8), std::span(&p, 1)));
}

TEST(Validate, OverlappingIntervals) {
  const auto p = partition_of({{"x", "d", Interval{0, 3}}, {"y", "d", Interval{2, 4}}});
  EXPECT_EQ(code_of([&] { validate(integer_domain(8), std::span(&p, 1)); }),
            ErrorCode::OverlapError);
}

TEST(Validate, OverlappingCellSets) {
  const auto p = partition_of({{"x", "d", CellSet{{1, 2}}}, {"y", "d", CellSet{{2, 3}}}});
  try {
    validate(integer_domain(8), std::span(&p, 1));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlapError);
    const auto &ids = e.subjects();
    EXPECT_NE(std::find(ids.begin(), ids.end(), "x"), ids.end());
    EXPECT_NE(std::find(ids.begin(), ids.end(), "y"), ids.end());
  }
}

TEST(Validate, StructuralErrors) {
  EXPECT_EQ(code_of([&] {
              const auto p = partition_of({});
              validate(integer_domain(8), std::span(&p, 1));
            }),
            ErrorCode::EmptyPartition);
  EXPECT_EQ(code_of([&] {
              const auto p = partition_of({{"x", "d", Interval{3, 3}}});
              validate(integer_domain(8), std::span(&p, 1));
            }),
            ErrorCode::InvalidGeometry);
  EXPECT_EQ(code_of([&] {
              const auto p = partition_of({{"x", "d", CellSet{{9}}}});
              validate(integer_domain(8), std::span(&p, 1));
            }),
            ErrorCode::OutOfBounds);
  EXPECT_EQ(code_of([&] {
              const auto p = partition_of({{"x", "d", Interval{0, 20}}});
              validate(integer_domain(8), std::span(&p, 1));
            }),
            ErrorCode::OutOfBounds);
}

TEST(Centroid, IntervalAndCells) {
  EXPECT_EQ(centroid({"s", "d", Interval{0, 2}}, integer_grid(0.0, 8)),
            (std::vector<double>{1.0}));
  const GridSpec g2{{0.0, 0.0}, {2.0, 2.0}, {2, 2}};
  EXPECT_EQ(centroid({"s", "d", CellSet{{0, 2}}}, g2), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(centroid({"s", "d", CellSet{{0, 1, 2, 3}}}, g2),
            (std::vector<double>{1.0, 1.0}));
}

TEST(Grid, RavelRoundTrip) {
  const GridSpec g{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {3, 4, 5}};
  for (std::size_t f = 0; f < g.size(); ++f)
    EXPECT_EQ(g.ravel(g.unravel(f)), f);
}

TEST(Grid, CoveringTilesExtent) {
  const auto d = fixtures::line_domain("d", 10, 2.0, 4.0);
  EXPECT_NO_THROW(d.validate());
  EXPECT_DOUBLE_EQ(d.grid.coordinate(0, 0), 2.1);
  const auto sq = fixtures::square_domain("s", 4, 5);
  EXPECT_NO_THROW(sq.validate());
}

TEST(Grid, RegularPartitionsAreValid) {
  const auto d = fixtures::line_domain("d", 30);
  const auto p = partition_of(regular_intervals(d, 7, "b"));
  Partition q = p;
  q.domain_id = "d";
  EXPECT_NO_THROW(validate(d, std::span(&q, 1)));
  const auto sq = fixtures::square_domain("d", 6, 6);
  auto blocks = partition_of(regular_blocks(sq, 3, 2, "r"));
  EXPECT_EQ(blocks.supports.size(), 6u);
  EXPECT_NO_THROW(validate(sq, std::span(&blocks, 1)));
}

TEST(Aggregation, Names) {
  EXPECT_EQ(aggregation_from_string("average"), AggregationKind::Average);
  EXPECT_EQ(aggregation_from_string(to_string(AggregationKind::Sum)), AggregationKind::Sum);
}
