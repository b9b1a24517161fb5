#pragma once

/**
 * @file packed.hpp
 * @brief Packed multi-problem storage with two mirrored value spaces.
 *
 * Rows of variable length are stored back to back in one flat array and addressed through a
 * CRS-style row-offset array. Two copies of the value array exist (space A, the working or
 * "device" copy, and space B, the mirror or "host" copy). Writers mark the space they modified;
 * `sync` brings the other space up to date. The layout is fixed once constructed.
 */

#include "drbatch/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drb {

enum class Space { A, B };

inline constexpr Space other(Space s) noexcept { return s == Space::A ? Space::B : Space::A; }

template <class T>
class PackedStorage {
public:
    using value_type = T;

    PackedStorage() : offsets_{0} {}

    /// Rows of the given lengths, every value set to `fill` in both spaces.
    explicit PackedStorage(std::span<const std::size_t> row_lengths, const T& fill = T{}) {
        offsets_.reserve(row_lengths.size() + 1);
        offsets_.push_back(0);
        for (auto n : row_lengths)
            offsets_.push_back(offsets_.back() + n);
        values_a_.assign(offsets_.back(), fill);
        values_b_ = values_a_;
    }

    static PackedStorage pack(const std::vector<std::vector<T>>& rows) {
        std::vector<std::size_t> lengths;
        lengths.reserve(rows.size());
        for (const auto& r : rows)
            lengths.push_back(r.size());
        PackedStorage s(lengths);
        auto out = s.values_a_.begin();
        for (const auto& r : rows)
            out = std::copy(r.begin(), r.end(), out);
        s.values_b_ = s.values_a_;
        return s;
    }

    std::size_t size() const noexcept { return offsets_.size() - 1; }
    std::size_t total_length() const noexcept { return offsets_.back(); }
    std::size_t row_length(std::size_t i) const { return offsets_.at(i + 1) - offsets_.at(i); }

    std::span<const std::size_t> offsets() const noexcept { return offsets_; }

    std::span<T> subview(std::size_t i, Space space) {
        check_row(i);
        auto& v = values(space);
        return std::span<T>(v.data() + offsets_[i], offsets_[i + 1] - offsets_[i]);
    }

    std::span<const T> subview(std::size_t i, Space space) const {
        check_row(i);
        const auto& v = values(space);
        return std::span<const T>(v.data() + offsets_[i], offsets_[i + 1] - offsets_[i]);
    }

    std::span<T> values_in(Space space) { return values(space); }
    std::span<const T> values_in(Space space) const { return values(space); }

    bool modified(Space space) const noexcept { return space == Space::A ? modified_a_ : modified_b_; }

    /// Record that `space` holds newer data than its mirror.
    void mark_modified(Space space) {
        if (modified(other(space)))
            throw StateError("divergent spaces: both mirrors marked modified");
        flag(space) = true;
    }

    /// Bring `target` up to date. Copies only if the other space was marked modified and differs.
    void sync(Space target) {
        const Space source = other(target);
        if (!modified(source))
            return;
        auto& src = values(source);
        auto& dst = values(target);
        if (src != dst)
            std::copy(src.begin(), src.end(), dst.begin());
        modified_a_ = modified_b_ = false;
    }

private:
    void check_row(std::size_t i) const {
        if (i >= size())
            throw std::out_of_range("packed row " + std::to_string(i) + " out of range (" +
                                    std::to_string(size()) + " rows)");
    }

    std::vector<T>& values(Space s) { return s == Space::A ? values_a_ : values_b_; }
    const std::vector<T>& values(Space s) const { return s == Space::A ? values_a_ : values_b_; }
    bool& flag(Space s) { return s == Space::A ? modified_a_ : modified_b_; }

    std::vector<std::size_t> offsets_;
    std::vector<T> values_a_;
    std::vector<T> values_b_;
    bool modified_a_ = false;
    bool modified_b_ = false;
};

} // namespace drb
