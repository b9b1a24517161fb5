#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drb {

/**
 * @brief Stable partition of degrees of freedom into a free prefix and a fixed suffix.
 *
 * DOF `d = 3*node + axis` in the original numbering maps to `perm()[d]` in solver order.
 * All three DOFs of a boundary node are fixed. The relative order of free DOFs, and of fixed
 * DOFs, is preserved, so each node's three DOFs stay contiguous in solver order.
 */
class DofMap {
public:
    DofMap() = default;

    template <class NodeRange>
    DofMap(std::size_t n_nodes, const NodeRange& boundary_nodes) {
        std::vector<char> fixed(n_nodes, 0);
        for (auto b : boundary_nodes) {
            if (static_cast<std::size_t>(b) >= n_nodes)
                throw std::invalid_argument("boundary node " + std::to_string(b) + " out of range");
            fixed[b] = 1;
        }
        n_total_ = 3 * n_nodes;
        perm_.resize(n_total_);
        inv_perm_.resize(n_total_);
        std::size_t n_fixed_nodes = 0;
        for (auto f : fixed)
            n_fixed_nodes += f;
        n_free_ = 3 * (n_nodes - n_fixed_nodes);

        std::size_t next_free = 0, next_fixed = n_free_;
        for (std::size_t d = 0; d < n_total_; ++d) {
            const std::size_t to = fixed[d / 3] ? next_fixed++ : next_free++;
            perm_[d] = to;
            inv_perm_[to] = d;
        }
    }

    std::size_t n_free() const noexcept { return n_free_; }
    std::size_t n_total() const noexcept { return n_total_; }
    std::size_t n_fixed() const noexcept { return n_total_ - n_free_; }

    const std::vector<std::size_t>& perm() const noexcept { return perm_; }
    const std::vector<std::size_t>& inv_perm() const noexcept { return inv_perm_; }

    bool is_fixed(std::size_t original_dof) const { return perm_.at(original_dof) >= n_free_; }

    /// out[perm[d]] = in[d]
    template <class T>
    void permute(std::span<const T> in, std::span<T> out) const {
        check(in.size(), out.size());
        for (std::size_t d = 0; d < n_total_; ++d)
            out[perm_[d]] = in[d];
    }

    /// out[d] = in[perm[d]]
    template <class T>
    void unpermute(std::span<const T> in, std::span<T> out) const {
        check(in.size(), out.size());
        for (std::size_t d = 0; d < n_total_; ++d)
            out[d] = in[perm_[d]];
    }

    template <class T>
    std::vector<T> permute(const std::vector<T>& v) const {
        std::vector<T> out(v.size());
        permute(std::span<const T>(v), std::span<T>(out));
        return out;
    }

    template <class T>
    std::vector<T> unpermute(const std::vector<T>& v) const {
        std::vector<T> out(v.size());
        unpermute(std::span<const T>(v), std::span<T>(out));
        return out;
    }

private:
    void check(std::size_t n_in, std::size_t n_out) const {
        if (n_in != n_total_ || n_out != n_total_)
            throw std::invalid_argument("vector length " + std::to_string(n_in) + " does not match DOF count " +
                                        std::to_string(n_total_));
    }

    std::vector<std::size_t> perm_;
    std::vector<std::size_t> inv_perm_;
    std::size_t n_free_ = 0;
    std::size_t n_total_ = 0;
};

template <class NodeRange>
DofMap build_dofmap(std::size_t n_nodes, const NodeRange& boundary_nodes) {
    return DofMap(n_nodes, boundary_nodes);
}

} // namespace drb
