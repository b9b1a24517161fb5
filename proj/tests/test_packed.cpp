#include "drbatch/packed.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace drb;

namespace {

std::vector<double> as_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

} // namespace

TEST(PackedStorage, PackExamples) {
    auto s = PackedStorage<double>::pack({{1, 2}, {3, 4, 5}});
    EXPECT_EQ(std::vector<std::size_t>(s.offsets().begin(), s.offsets().end()), (std::vector<std::size_t>{0, 2, 5}));
    EXPECT_EQ(as_vec(s.values_in(Space::A)), (std::vector<double>{1, 2, 3, 4, 5}));
    EXPECT_EQ(as_vec(s.values_in(Space::B)), (std::vector<double>{1, 2, 3, 4, 5}));
    EXPECT_FALSE(s.modified(Space::A));
    EXPECT_FALSE(s.modified(Space::B));

    auto e = PackedStorage<double>::pack({{}, {7}});
    EXPECT_EQ(std::vector<std::size_t>(e.offsets().begin(), e.offsets().end()), (std::vector<std::size_t>{0, 0, 1}));
    EXPECT_TRUE(e.subview(0, Space::A).empty());
    EXPECT_EQ(as_vec(e.values_in(Space::A)), (std::vector<double>{7}));

    std::vector<std::vector<double>> rows(100, std::vector<double>(3, 1.0));
    EXPECT_EQ(PackedStorage<double>::pack(rows).offsets()[100], 300u);
}

TEST(PackedStorage, SubviewExamples) {
    auto s = PackedStorage<double>::pack({{1, 2}, {3, 4, 5}});
    EXPECT_EQ(as_vec(s.subview(1, Space::A)), (std::vector<double>{3, 4, 5}));
    s.subview(0, Space::A)[0] = 9;
    EXPECT_EQ(as_vec(s.values_in(Space::A)), (std::vector<double>{9, 2, 3, 4, 5}));
    EXPECT_EQ(as_vec(s.values_in(Space::B)), (std::vector<double>{1, 2, 3, 4, 5}));
    EXPECT_THROW(s.subview(2, Space::A), std::out_of_range);
}

TEST(PackedStorage, SyncExamples) {
    auto s = PackedStorage<double>::pack({{1, 2}, {3, 4, 5}});
    s.subview(1, Space::A)[2] = -1;
    s.mark_modified(Space::A);
    s.sync(Space::B);
    EXPECT_EQ(as_vec(s.values_in(Space::B)), as_vec(s.values_in(Space::A)));
    EXPECT_FALSE(s.modified(Space::A));
    EXPECT_FALSE(s.modified(Space::B));

    const auto before_a = as_vec(s.values_in(Space::A));
    s.sync(Space::B);
    s.sync(Space::A);
    EXPECT_EQ(as_vec(s.values_in(Space::A)), before_a);
    EXPECT_EQ(as_vec(s.values_in(Space::B)), before_a);

    s.mark_modified(Space::A);
    EXPECT_THROW(s.mark_modified(Space::B), StateError);
}

TEST(PackedStorage, SyncIntoModifiedSpaceKeepsFlag) {
    auto s = PackedStorage<double>::pack({{1}});
    s.subview(0, Space::B)[0] = 2;
    s.mark_modified(Space::B);
    s.sync(Space::B); // B is already newest
    EXPECT_TRUE(s.modified(Space::B));
    s.sync(Space::A);
    EXPECT_EQ(s.subview(0, Space::A)[0], 2.0);
    EXPECT_FALSE(s.modified(Space::B));
}

TEST(PackedStorage, GenericElementType) {
    struct Pair {
        int a;
        float b;
        bool operator==(const Pair&) const = default;
    };
    auto s = PackedStorage<Pair>::pack({{{1, 1.5f}}, {{2, 2.5f}, {3, 3.5f}}});
    EXPECT_EQ(s.subview(1, Space::A)[1], (Pair{3, 3.5f}));
}

TEST(PackedStorage, FencepostWithCanaries) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> lengths(1 + rng() % 10);
        for (auto& n : lengths)
            n = rng() % 6;
        PackedStorage<double> s(lengths, -7.0);
        const std::size_t i = rng() % lengths.size();
        for (auto& x : s.subview(i, Space::A))
            x = 42.0;
        const auto all = s.values_in(Space::A);
        for (std::size_t k = 0; k < all.size(); ++k) {
            const bool inside = k >= s.offsets()[i] && k < s.offsets()[i + 1];
            EXPECT_EQ(all[k], inside ? 42.0 : -7.0);
        }
    }
}

TEST(PackedStorage, RoundTripRandomRows) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> rows(rng() % 12);
        std::vector<double> flat;
        for (auto& r : rows) {
            r.resize(rng() % 7);
            for (auto& x : r) {
                x = double(rng() % 1000);
                flat.push_back(x);
            }
        }
        const auto s = PackedStorage<double>::pack(rows);
        std::vector<double> read;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (double x : s.subview(i, Space::B))
                read.push_back(x);
        EXPECT_EQ(read, flat);
    }
}
