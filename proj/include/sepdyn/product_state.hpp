#pragma once

#include <utility>
#include <vector>

#include "sepdyn/layout.hpp"

namespace sepdyn {

// Pure product state |psi_0> x |psi_1> x ... stored as its local factors,
// possibly unnormalized. The represented joint vector is exactly the
// Kronecker product of the locals.
struct ProductState {
    std::vector<VecX> locals;
    SubsystemLayout layout;

    ProductState() = default;
    ProductState(std::vector<VecX> loc, SubsystemLayout lay)
        : locals(std::move(loc)), layout(std::move(lay)) {
        if (static_cast<int>(locals.size()) != layout.num_parts())
            throw DimensionMismatch("number of local factors does not match layout");
        for (int k = 0; k < layout.num_parts(); ++k)
            if (locals[k].size() != layout.dims[k])
                throw DimensionMismatch("local factor dimension mismatch");
    }

    int num_parts() const { return layout.num_parts(); }

    double norm2() const {
        double n = 1.0;
        for (const auto& v : locals) n *= v.squaredNorm();
        return n;
    }

    VecX joint() const {
        VecX out = locals[0];
        for (size_t k = 1; k < locals.size(); ++k) {
            VecX next(out.size() * locals[k].size());
            Eigen::Index pos = 0;
            for (Eigen::Index i = 0; i < out.size(); ++i)
                for (Eigen::Index j = 0; j < locals[k].size(); ++j)
                    next[pos++] = out[i] * locals[k][j];
            out.swap(next);
        }
        return out;
    }

    ProductState normalized() const {
        ProductState out = *this;
        for (auto& v : out.locals) {
            double n = v.norm();
            if (n < 1e-150) throw ZeroNormState("cannot normalize zero local factor");
            v /= n;
        }
        return out;
    }

    MatX density() const {
        VecX j = joint();
        double n2 = j.squaredNorm();
        if (n2 < 1e-300) throw ZeroNormState("zero-norm product state");
        return (j * j.adjoint()) / n2;
    }
};

// Mixed initial conditions enter as weighted pure product branches.
struct WeightedBranch {
    double weight = 1.0;
    ProductState state;
};

}  // namespace sepdyn
