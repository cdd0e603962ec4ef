#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <stdexcept>

#include <Eigen/Dense>
#include <fftw3.h>

namespace tacos {

using cplx = std::complex<double>;

/// Length-N complex DFT backed by FFTW.
///
/// Conventions: forward is X[k] = sum_n x[n] e^{-2*pi*i*k*n/N}, inverse
/// carries the 1/N factor so that inverse(forward(x)) == x.
///
/// An instance owns its aligned scratch buffers and is therefore not safe to
/// share between threads; use shared_fft() to get a per-thread cached
/// instance. FFTW's planner is guarded by a global mutex, execution is not.
class Fft {
public:
    explicit Fft(int n) : n_(n) {
        if (n < 1) throw std::invalid_argument("Fft: length must be >= 1");
        std::lock_guard<std::mutex> lock(planner_mutex());
        in_ = fftw_alloc_complex(static_cast<size_t>(n));
        out_ = fftw_alloc_complex(static_cast<size_t>(n));
        if (in_ == nullptr || out_ == nullptr) {
            release();
            throw std::bad_alloc();
        }
        forward_plan_ = fftw_plan_dft_1d(n, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_plan_ = fftw_plan_dft_1d(n, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (forward_plan_ == nullptr || backward_plan_ == nullptr) {
            release();
            throw std::runtime_error("Fft: FFTW plan creation failed");
        }
    }

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    ~Fft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        release();
    }

    int size() const { return n_; }

    /// X[k] = sum_n x[n] e^{-2 pi i k n / N}
    Eigen::VectorXcd forward(const Eigen::VectorXcd& x) const {
        check_size(x.size());
        load(x.data());
        fftw_execute(forward_plan_);
        return unload(1.0);
    }

    Eigen::VectorXcd forward(const Eigen::VectorXd& x) const {
        check_size(x.size());
        for (int i = 0; i < n_; ++i) {
            in_[i][0] = x[i];
            in_[i][1] = 0.0;
        }
        fftw_execute(forward_plan_);
        return unload(1.0);
    }

    /// x[n] = (1/N) sum_k X[k] e^{+2 pi i k n / N}
    Eigen::VectorXcd inverse(const Eigen::VectorXcd& x) const {
        check_size(x.size());
        load(x.data());
        fftw_execute(backward_plan_);
        return unload(1.0 / static_cast<double>(n_));
    }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    void check_size(Eigen::Index sz) const {
        if (sz != n_) throw std::invalid_argument("Fft: input length mismatch");
    }

    void load(const cplx* data) const {
        for (int i = 0; i < n_; ++i) {
            in_[i][0] = data[i].real();
            in_[i][1] = data[i].imag();
        }
    }

    Eigen::VectorXcd unload(double scale) const {
        Eigen::VectorXcd y(n_);
        for (int i = 0; i < n_; ++i) y[i] = cplx(out_[i][0] * scale, out_[i][1] * scale);
        return y;
    }

    void release() {
        if (forward_plan_ != nullptr) fftw_destroy_plan(forward_plan_);
        if (backward_plan_ != nullptr) fftw_destroy_plan(backward_plan_);
        if (in_ != nullptr) fftw_free(in_);
        if (out_ != nullptr) fftw_free(out_);
        forward_plan_ = backward_plan_ = nullptr;
        in_ = out_ = nullptr;
    }

    int n_ = 0;
    // scratch is mutable so transforms can be called through const references
    mutable fftw_complex* in_ = nullptr;
    mutable fftw_complex* out_ = nullptr;
    fftw_plan forward_plan_ = nullptr;
    fftw_plan backward_plan_ = nullptr;
};

/// Per-thread cache of transforms keyed by length, so free functions can do
/// spectral work without threading plan objects through every signature.
inline const Fft& shared_fft(int n) {
    thread_local std::map<int, std::unique_ptr<Fft>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft>(n)).first;
    return *it->second;
}

/// Applies a real frequency-domain diagonal operator: IDFT(gain .* DFT(x)).
/// With an even-symmetric gain (gain[N-k] == gain[k]) this maps real vectors
/// to real vectors; the caller decides whether to keep the imaginary part.
inline Eigen::VectorXcd apply_spectral_gain(const Eigen::VectorXd& gain,
                                            const Eigen::VectorXcd& x) {
    const int n = static_cast<int>(x.size());
    if (gain.size() != n) throw std::invalid_argument("apply_spectral_gain: gain length mismatch");
    const Fft& fft = shared_fft(n);
    Eigen::VectorXcd spec = fft.forward(x);
    spec.array() *= gain.array();
    return fft.inverse(spec);
}

inline Eigen::VectorXd apply_spectral_gain_real(const Eigen::VectorXd& gain,
                                                const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    if (gain.size() != n) throw std::invalid_argument("apply_spectral_gain: gain length mismatch");
    const Fft& fft = shared_fft(n);
    Eigen::VectorXcd spec = fft.forward(x);
    spec.array() *= gain.array();
    return fft.inverse(spec).real();
}

}  // namespace tacos
