#pragma once

#include <cstdint>

namespace sepdyn {

// Philox4x32-10 counter-based generator. Each (key, stream) pair is an
// independent stream; we key on the master seed and stream on the trajectory
// index, so trajectory i draws the same numbers no matter which thread runs
// it or in which order.
class Philox4x32 {
  public:
    Philox4x32(uint64_t key, uint64_t stream)
        : k0_(static_cast<uint32_t>(key)), k1_(static_cast<uint32_t>(key >> 32)),
          c2_(static_cast<uint32_t>(stream)), c3_(static_cast<uint32_t>(stream >> 32)) {}

    uint64_t next_u64() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        uint32_t x0 = c0_, x1 = c1_, x2 = c2_, x3 = c3_;
        uint32_t k0 = k0_, k1 = k1_;
        for (int round = 0; round < 10; ++round) {
            uint64_t p0 = static_cast<uint64_t>(kMul0) * x0;
            uint64_t p1 = static_cast<uint64_t>(kMul1) * x2;
            uint32_t y0 = static_cast<uint32_t>(p1 >> 32) ^ x1 ^ k0;
            uint32_t y1 = static_cast<uint32_t>(p1);
            uint32_t y2 = static_cast<uint32_t>(p0 >> 32) ^ x3 ^ k1;
            uint32_t y3 = static_cast<uint32_t>(p0);
            x0 = y0;
            x1 = y1;
            x2 = y2;
            x3 = y3;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        if (++c0_ == 0) ++c1_;
        spare_ = (static_cast<uint64_t>(x2) << 32) | x3;
        have_ = true;
        return (static_cast<uint64_t>(x0) << 32) | x1;
    }

    // Uniform in the open interval (0, 1).
    double next_unit() {
        for (;;) {
            double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

  private:
    static constexpr uint32_t kMul0 = 0xD2511F53u;
    static constexpr uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

    uint32_t k0_, k1_;
    uint32_t c0_ = 0, c1_ = 0, c2_, c3_;
    uint64_t spare_ = 0;
    bool have_ = false;
};

}  // namespace sepdyn
