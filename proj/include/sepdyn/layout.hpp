#pragma once

#include <numeric>
#include <vector>

#include "sepdyn/common.hpp"

namespace sepdyn {

// Ordered list of local dimensions of a multipartite Hilbert space.
// Joint indices follow standard Kronecker order: the first subsystem
// varies slowest, i.e. idx = ((i_0*d_1 + i_1)*d_2 + i_2)...
struct SubsystemLayout {
    std::vector<int> dims;

    SubsystemLayout() = default;
    explicit SubsystemLayout(std::vector<int> d) : dims(std::move(d)) {
        if (dims.empty()) throw DimensionMismatch("layout needs at least one subsystem");
        for (int dk : dims)
            if (dk < 2) throw DimensionMismatch("subsystem dimension must be >= 2");
        if (total() > (1 << 20)) throw DimensionMismatch("total dimension too large");
    }

    static SubsystemLayout qubits(int n) {
        return SubsystemLayout(std::vector<int>(static_cast<size_t>(n), 2));
    }

    int num_parts() const { return static_cast<int>(dims.size()); }

    int total() const {
        long long d = 1;
        for (int dk : dims) d *= dk;
        return static_cast<int>(d);
    }

    // Joint-index stride of subsystem k.
    int stride(int k) const {
        check_part(k);
        long long s = 1;
        for (size_t j = k + 1; j < dims.size(); ++j) s *= dims[j];
        return static_cast<int>(s);
    }

    int cofactor_dim(int k) const {
        check_part(k);
        return total() / dims[k];
    }

    void check_part(int k) const {
        if (k < 0 || k >= num_parts()) throw DimensionMismatch("subsystem index out of range");
    }

    bool operator==(const SubsystemLayout& o) const { return dims == o.dims; }
    bool operator!=(const SubsystemLayout& o) const { return !(*this == o); }
};

}  // namespace sepdyn
