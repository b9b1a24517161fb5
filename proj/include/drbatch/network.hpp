#pragma once

/**
 * @file network.hpp
 * @brief Fiber-network geometry, materials, affine RVE boundary conditions and the text file format.
 *
 * A network is a pin-jointed truss: nodes carry reference coordinates, elements are two-node
 * segments with a material index, and a subset of nodes is kinematically constrained.
 */

#include "drbatch/detail/text.hpp"
#include "drbatch/errors.hpp"
#include "drbatch/linalg.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace drb {

struct Material {
    double elastic_modulus = 1.0;
    double cross_section_area = 1.0;
    double density = 1.0;

    bool operator==(const Material&) const = default;
};

struct Element {
    std::size_t node_a = 0;
    std::size_t node_b = 0;
    std::size_t material = 0;

    bool operator==(const Element&) const = default;
};

/**
 * @brief Immutable truss network.
 *
 * Construct through the validating constructor (or `load_network` / `generate_lattice`);
 * every invariant holds for the lifetime of the object.
 */
class FiberNetwork {
public:
    FiberNetwork(std::vector<Vec3> nodes, std::vector<Element> elements, std::vector<Material> materials,
                 std::vector<std::size_t> boundary, std::optional<double> rve_volume = std::nullopt)
        : nodes_(std::move(nodes)),
          elements_(std::move(elements)),
          materials_(std::move(materials)),
          boundary_(std::move(boundary)),
          volume_(rve_volume) {
        validate();
    }

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t element_count() const noexcept { return elements_.size(); }
    std::size_t dof_count() const noexcept { return 3 * nodes_.size(); }

    const std::vector<Vec3>& nodes() const noexcept { return nodes_; }
    const std::vector<Element>& elements() const noexcept { return elements_; }
    const std::vector<Material>& materials() const noexcept { return materials_; }
    const std::vector<std::size_t>& boundary_nodes() const noexcept { return boundary_; }

    const Material& material_of(std::size_t element) const { return materials_[elements_[element].material]; }

    double reference_length(std::size_t element) const {
        const auto& e = elements_[element];
        return norm(nodes_[e.node_b] - nodes_[e.node_a]);
    }

    /// Volume stored in the file, if any.
    const std::optional<double>& explicit_volume() const noexcept { return volume_; }

    /// RVE volume; falls back to the reference bounding box. Degenerate axes contribute a factor of 1.
    double volume() const {
        if (volume_)
            return *volume_;
        return bounding_box_volume(nodes_);
    }

    bool operator==(const FiberNetwork&) const = default;

    static double bounding_box_volume(const std::vector<Vec3>& nodes) {
        if (nodes.empty())
            return 1.0;
        Vec3 lo = nodes.front(), hi = nodes.front();
        for (const auto& x : nodes)
            for (int k = 0; k < 3; ++k) {
                lo[k] = std::min(lo[k], x[k]);
                hi[k] = std::max(hi[k], x[k]);
            }
        double v = 1.0;
        for (int k = 0; k < 3; ++k) {
            const double extent = hi[k] - lo[k];
            if (extent > 0.0)
                v *= extent;
        }
        return v;
    }

private:
    void validate() const {
        for (std::size_t i = 0; i < materials_.size(); ++i) {
            const auto& m = materials_[i];
            if (!(m.elastic_modulus > 0.0) || !(m.cross_section_area > 0.0) || !(m.density > 0.0))
                throw ValidationError("material " + std::to_string(i) + ": E, A and rho must be positive");
        }
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t i = 0; i < elements_.size(); ++i) {
            const auto& e = elements_[i];
            const std::string who = "element " + std::to_string(i);
            if (e.node_a >= nodes_.size() || e.node_b >= nodes_.size())
                throw ValidationError(who + ": node index out of range");
            if (e.node_a == e.node_b)
                throw ValidationError(who + ": connects a node to itself");
            if (e.material >= materials_.size())
                throw ValidationError(who + ": material index out of range");
            if (!seen.insert(std::minmax(e.node_a, e.node_b)).second)
                throw ValidationError(who + ": duplicate element");
            if (!(reference_length(i) > 0.0))
                throw ValidationError(who + ": zero reference length");
        }
        std::set<std::size_t> bset;
        for (auto b : boundary_) {
            if (b >= nodes_.size())
                throw ValidationError("boundary node " + std::to_string(b) + ": index out of range");
            if (!bset.insert(b).second)
                throw ValidationError("boundary node " + std::to_string(b) + ": listed twice");
        }
        if (volume_ && !(*volume_ > 0.0))
            throw ValidationError("volume must be positive");
    }

    std::vector<Vec3> nodes_;
    std::vector<Element> elements_;
    std::vector<Material> materials_;
    std::vector<std::size_t> boundary_;
    std::optional<double> volume_;
};

/// Affine (kinematic uniform) RVE boundary condition driven by a deformation gradient.
class AffineBC {
public:
    AffineBC() : f_(identity3()) {}

    explicit AffineBC(const Mat3& deformation_gradient) : f_(deformation_gradient) {
        if (!(det(f_) > 0.0))
            throw std::invalid_argument("deformation gradient must have positive determinant");
    }

    const Mat3& deformation_gradient() const noexcept { return f_; }

    /// u = (F - I) X
    Vec3 displacement_at(const Vec3& x) const {
        Mat3 g = f_;
        for (int k = 0; k < 3; ++k)
            g[k][k] -= 1.0;
        return g * x;
    }

private:
    Mat3 f_;
};

using PrescribedDisplacements = std::map<std::size_t, Vec3>;

inline PrescribedDisplacements apply_affine_bc(const FiberNetwork& network, const AffineBC& bc) {
    PrescribedDisplacements out;
    for (auto b : network.boundary_nodes())
        out.emplace(b, bc.displacement_at(network.nodes()[b]));
    return out;
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace detail {

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    /// Next non-blank line with comments removed, split into tokens.
    bool next(std::vector<std::string_view>& tokens) {
        while (pos_ < text_.size()) {
            auto eol = text_.find('\n', pos_);
            if (eol == std::string_view::npos)
                eol = text_.size();
            auto line = text_.substr(pos_, eol - pos_);
            pos_ = eol + 1;
            ++line_no_;
            if (auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            tokens = split_ws(line);
            if (!tokens.empty())
                return true;
        }
        return false;
    }

    std::size_t line() const noexcept { return line_no_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

} // namespace detail

/**
 * @brief Parse the network text format.
 *
 * Sections appear in order: `nodes N`, `elements M`, `materials K`, `boundary B`, and an
 * optional `volume V`. '#' starts a comment. Indices are 0-based.
 */
inline FiberNetwork load_network(std::string_view text) {
    detail::LineReader rd(text);
    std::vector<std::string_view> tok;

    auto expect_header = [&](std::string_view keyword) -> std::size_t {
        if (!rd.next(tok))
            throw ParseError(rd.line() + 1, "expected '" + std::string(keyword) + "' section");
        if (tok.size() != 2 || tok[0] != keyword)
            throw ParseError(rd.line(), "expected '" + std::string(keyword) + " <count>'");
        auto n = detail::parse_size(tok[1]);
        if (!n)
            throw ParseError(rd.line(), "bad count '" + std::string(tok[1]) + "'");
        return *n;
    };
    auto row = [&](std::size_t width, std::string_view section) {
        if (!rd.next(tok))
            throw ParseError(rd.line() + 1, "unexpected end of input in " + std::string(section));
        if (tok.size() != width)
            throw ParseError(rd.line(), "expected " + std::to_string(width) + " fields in " + std::string(section));
    };
    auto real = [&](std::string_view s) {
        auto v = detail::parse_double(s);
        if (!v)
            throw ParseError(rd.line(), "bad number '" + std::string(s) + "'");
        return *v;
    };
    auto index = [&](std::string_view s) {
        auto v = detail::parse_size(s);
        if (!v)
            throw ParseError(rd.line(), "bad index '" + std::string(s) + "'");
        return *v;
    };

    std::vector<Vec3> nodes(expect_header("nodes"));
    for (auto& x : nodes) {
        row(3, "nodes");
        x = {real(tok[0]), real(tok[1]), real(tok[2])};
    }
    std::vector<Element> elements(expect_header("elements"));
    for (auto& e : elements) {
        row(3, "elements");
        e = {index(tok[0]), index(tok[1]), index(tok[2])};
    }
    std::vector<Material> materials(expect_header("materials"));
    for (auto& m : materials) {
        row(3, "materials");
        m = {real(tok[0]), real(tok[1]), real(tok[2])};
    }
    std::vector<std::size_t> boundary(expect_header("boundary"));
    for (auto& b : boundary) {
        row(1, "boundary");
        b = index(tok[0]);
    }
    std::optional<double> volume;
    if (rd.next(tok)) {
        if (tok.size() != 2 || tok[0] != "volume")
            throw ParseError(rd.line(), "expected 'volume <V>' or end of input");
        volume = real(tok[1]);
        if (rd.next(tok))
            throw ParseError(rd.line(), "trailing content after volume");
    }
    return FiberNetwork(std::move(nodes), std::move(elements), std::move(materials), std::move(boundary), volume);
}

inline FiberNetwork load_network(std::istream& in) {
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return load_network(std::string_view(text));
}

inline std::string save_network(const FiberNetwork& net) {
    using detail::format_double;
    std::string out;
    out += "nodes " + std::to_string(net.node_count()) + "\n";
    for (const auto& x : net.nodes())
        out += format_double(x[0]) + " " + format_double(x[1]) + " " + format_double(x[2]) + "\n";
    out += "elements " + std::to_string(net.element_count()) + "\n";
    for (const auto& e : net.elements())
        out += std::to_string(e.node_a) + " " + std::to_string(e.node_b) + " " + std::to_string(e.material) + "\n";
    out += "materials " + std::to_string(net.materials().size()) + "\n";
    for (const auto& m : net.materials())
        out += format_double(m.elastic_modulus) + " " + format_double(m.cross_section_area) + " " +
               format_double(m.density) + "\n";
    out += "boundary " + std::to_string(net.boundary_nodes().size()) + "\n";
    for (auto b : net.boundary_nodes())
        out += std::to_string(b) + "\n";
    if (net.explicit_volume())
        out += "volume " + format_double(*net.explicit_volume()) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct LatticeSpec {
    std::size_t nx = 3, ny = 3, nz = 3;
    double jitter = 0.0;
    std::uint64_t seed = 0;
    Material material{};

    bool operator==(const LatticeSpec&) const = default;
};

/**
 * Jittered grid on the unit cube. Interior nodes are displaced by a uniform draw in
 * [-jitter, jitter) times the grid spacing per axis; face nodes stay on the faces and are
 * all constrained. Elements are the grid edges along x, y and z.
 */
inline FiberNetwork generate_lattice(const LatticeSpec& spec) {
    const auto [nx, ny, nz] = std::tuple{spec.nx, spec.ny, spec.nz};
    if (nx < 2 || ny < 2 || nz < 2)
        throw std::invalid_argument("lattice counts must be at least 2 per axis");
    if (!(spec.jitter >= 0.0 && spec.jitter < 0.5))
        throw std::invalid_argument("jitter must lie in [0, 0.5)");

    const Vec3 h{1.0 / double(nx - 1), 1.0 / double(ny - 1), 1.0 / double(nz - 1)};
    auto id = [&](std::size_t i, std::size_t j, std::size_t k) { return i + nx * (j + ny * k); };

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<Vec3> nodes(nx * ny * nz);
    std::vector<std::size_t> boundary;
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                Vec3 x{double(i) * h[0], double(j) * h[1], double(k) * h[2]};
                const bool on_face = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
                if (on_face) {
                    boundary.push_back(id(i, j, k));
                } else if (spec.jitter > 0.0) {
                    for (int a = 0; a < 3; ++a)
                        x[a] += spec.jitter * h[a] * unit(rng);
                }
                nodes[id(i, j, k)] = x;
            }

    std::vector<Element> elements;
    elements.reserve(3 * nodes.size());
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                if (i + 1 < nx)
                    elements.push_back({id(i, j, k), id(i + 1, j, k), 0});
                if (j + 1 < ny)
                    elements.push_back({id(i, j, k), id(i, j + 1, k), 0});
                if (k + 1 < nz)
                    elements.push_back({id(i, j, k), id(i, j, k + 1), 0});
            }

    return FiberNetwork(std::move(nodes), std::move(elements), {spec.material}, std::move(boundary));
}

inline FiberNetwork generate_lattice(std::size_t nx, std::size_t ny, std::size_t nz, double jitter,
                                     std::uint64_t seed) {
    return generate_lattice(LatticeSpec{nx, ny, nz, jitter, seed, {}});
}

} // namespace drb
