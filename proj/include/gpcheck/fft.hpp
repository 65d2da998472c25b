#ifndef GPCHECK_FFT_HPP
#define GPCHECK_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <utility>
#include <vector>

#include "gpcheck/error.hpp"

namespace gpcheck {

// In-place complex transform of selected axes of a row-major tensor, reusable on
// any buffer of the same layout. Unnormalised in both directions. Plans use
// FFTW_ESTIMATE so results do not depend on timing measurements.
class FftPlan {
public:
    FftPlan(const std::vector<int>& extents, const std::vector<int>& axes, std::complex<double>* buffer) {
        const int rank = int(extents.size());
        std::vector<std::ptrdiff_t> stride(rank, 1);
        for (int i = rank - 2; i >= 0; --i) stride[i] = stride[i + 1] * extents[i + 1];
        std::vector<fftw_iodim64> dims, loops;
        std::vector<bool> used(rank, false);
        for (int a : axes) {
            if (a < 0 || a >= rank || used[a]) throw DimensionError("fft: bad axis list");
            used[a] = true;
            dims.push_back({extents[a], stride[a], stride[a]});
        }
        for (int i = 0; i < rank; ++i)
            if (!used[i]) loops.push_back({extents[i], stride[i], stride[i]});
        auto* p = reinterpret_cast<fftw_complex*>(buffer);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd_ = fftw_plan_guru64_dft(int(dims.size()), dims.data(), int(loops.size()), loops.data(), p, p, FFTW_FORWARD, flags);
        bwd_ = fftw_plan_guru64_dft(int(dims.size()), dims.data(), int(loops.size()), loops.data(), p, p, FFTW_BACKWARD, flags);
        if (!fwd_ || !bwd_) {
            release();
            throw CapabilityError("fft: plan creation failed");
        }
        size_ = 1;
        for (int a : axes) size_ *= std::size_t(extents[a]);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& o) noexcept : fwd_(std::exchange(o.fwd_, nullptr)), bwd_(std::exchange(o.bwd_, nullptr)), size_(o.size_) {}
    FftPlan& operator=(FftPlan&& o) noexcept {
        if (this != &o) {
            release();
            fwd_ = std::exchange(o.fwd_, nullptr);
            bwd_ = std::exchange(o.bwd_, nullptr);
            size_ = o.size_;
        }
        return *this;
    }
    ~FftPlan() { release(); }

    void forward(std::complex<double>* data) const {
        fftw_execute_dft(fwd_, reinterpret_cast<fftw_complex*>(data), reinterpret_cast<fftw_complex*>(data));
    }
    void backward(std::complex<double>* data) const {
        fftw_execute_dft(bwd_, reinterpret_cast<fftw_complex*>(data), reinterpret_cast<fftw_complex*>(data));
    }
    // Number of points in one transform; backward(forward(x)) = transform_size() * x.
    std::size_t transform_size() const { return size_; }

private:
    void release() {
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
        fwd_ = bwd_ = nullptr;
    }
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
    std::size_t size_ = 0;
};

} // namespace gpcheck

#endif
