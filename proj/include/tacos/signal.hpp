#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tacos/analytic.hpp"
#include "tacos/fft.hpp"
#include "tacos/rng.hpp"

namespace tacos {

/// Two-component real time series; columns are the u and v components.
struct BivariateSignal {
    Eigen::MatrixX2d samples;

    BivariateSignal() = default;
    explicit BivariateSignal(Eigen::MatrixX2d s) : samples(std::move(s)) { validate(); }

    int n() const { return static_cast<int>(samples.rows()); }

    void validate() const {
        if (samples.rows() < 2) throw std::invalid_argument("BivariateSignal: need at least 2 samples");
        if (!samples.allFinite()) throw std::invalid_argument("BivariateSignal: non-finite samples");
    }
};

/// Instantaneous ellipse description: amplitude, orientation, ellipticity,
/// frequency (cycles/sample) and cumulative phase, each sampled per instant.
struct EllipseTrack {
    Eigen::VectorXd amplitude;
    Eigen::VectorXd orientation;
    Eigen::VectorXd ellipticity;
    Eigen::VectorXd frequency;
    Eigen::VectorXd phase;

    int n() const { return static_cast<int>(amplitude.size()); }
};

/// Sequence of 2x2 Hermitian instantaneous covariance matrices; each is the
/// rank-1 outer product of one row of the analytic signal.
struct CovarianceTrack {
    std::vector<Eigen::Matrix2cd> sigma;

    int n() const { return static_cast<int>(sigma.size()); }
};

/// Maps ellipse parameters to the signal samples:
///   u = a (cos(theta) cos(chi) cos(phi) - sin(theta) sin(chi) sin(phi))
///   v = a (sin(theta) cos(chi) cos(phi) + cos(theta) sin(chi) sin(phi))
inline BivariateSignal synthesize_signal(const EllipseTrack& track) {
    const int n = track.n();
    if (n < 2) throw std::invalid_argument("synthesize_signal: track too short");
    if (track.orientation.size() != n || track.ellipticity.size() != n ||
        track.frequency.size() != n || track.phase.size() != n)
        throw std::invalid_argument("synthesize_signal: track length mismatch");

    Eigen::MatrixX2d x(n, 2);
    for (int i = 0; i < n; ++i) {
        const double a = track.amplitude[i];
        const double ct = std::cos(track.orientation[i]);
        const double st = std::sin(track.orientation[i]);
        const double cc = std::cos(track.ellipticity[i]) * std::cos(track.phase[i]);
        const double ss = std::sin(track.ellipticity[i]) * std::sin(track.phase[i]);
        x(i, 0) = a * (ct * cc - st * ss);
        x(i, 1) = a * (st * cc + ct * ss);
    }
    return BivariateSignal(std::move(x));
}

namespace detail {

/// Circular convolution with a normalized Gaussian kernel of width
/// sigma_samples, done in the frequency domain.
inline Eigen::VectorXd gaussian_smooth_circular(const Eigen::VectorXd& x, double sigma_samples) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd kernel(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = std::min<double>(i, n - i);  // circular distance to 0
        kernel[i] = std::exp(-0.5 * (d / sigma_samples) * (d / sigma_samples));
        total += kernel[i];
    }
    kernel /= total;

    const Fft& fft = shared_fft(n);
    Eigen::VectorXcd spec = fft.forward(x).cwiseProduct(fft.forward(kernel));
    return fft.inverse(spec).real();
}

/// Affine min-max rescaling into [lo, hi]; constant inputs map to the middle.
inline Eigen::VectorXd rescale(const Eigen::VectorXd& x, double lo, double hi) {
    const double mn = x.minCoeff();
    const double mx = x.maxCoeff();
    if (mx - mn < 1e-300) return Eigen::VectorXd::Constant(x.size(), 0.5 * (lo + hi));
    return (lo + (hi - lo) * (x.array() - mn) / (mx - mn)).matrix();
}

inline Eigen::VectorXd smooth_gaussian_track(Rng& rng, int n, double sigma_samples) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = rng.normal();
    return gaussian_smooth_circular(w, sigma_samples);
}

}  // namespace detail

/// Draws random smoothly-varying ellipse parameter tracks. Each parameter is
/// an independent white Gaussian sequence convolved with a circular Gaussian
/// kernel (std smoothness_sigma samples) and affinely rescaled:
/// amplitude into [0.5, 1.5], ellipticity into [-pi/4, pi/4], orientation
/// into a randomly centred window of width pi/2, frequency into the band.
/// The phase accumulates 2*pi*frequency per sample from a random offset.
inline EllipseTrack random_ellipse_track(int n, double f_lo, double f_hi,
                                         double smoothness_sigma, std::uint64_t seed) {
    using std::numbers::pi;
    EllipseTrack track;
    Rng amp_rng(derive_seed(seed, "amplitude"));
    Rng ori_rng(derive_seed(seed, "orientation"));
    Rng ell_rng(derive_seed(seed, "ellipticity"));
    Rng freq_rng(derive_seed(seed, "frequency"));
    Rng phase_rng(derive_seed(seed, "phase"));

    track.amplitude = detail::rescale(detail::smooth_gaussian_track(amp_rng, n, smoothness_sigma), 0.5, 1.5);
    const double center = ori_rng.uniform(-pi / 4, pi / 4);
    track.orientation = detail::rescale(detail::smooth_gaussian_track(ori_rng, n, smoothness_sigma),
                                        center - pi / 4, center + pi / 4);
    track.ellipticity = detail::rescale(detail::smooth_gaussian_track(ell_rng, n, smoothness_sigma),
                                        -pi / 4, pi / 4);
    track.frequency = detail::rescale(detail::smooth_gaussian_track(freq_rng, n, smoothness_sigma),
                                      f_lo, f_hi);

    track.phase.resize(n);
    track.phase[0] = phase_rng.uniform(0.0, 2 * pi);
    for (int i = 1; i < n; ++i) track.phase[i] = track.phase[i - 1] + 2 * pi * track.frequency[i];
    return track;
}

/// Synthesizes a random polarized signal with smoothly drifting ellipse
/// parameters and main frequency inside [f_lo, f_hi] cycles/sample.
/// Deterministic per seed.
inline std::pair<BivariateSignal, EllipseTrack> generate_signal(
    int n, double f_lo, double f_hi, double smoothness_sigma, std::uint64_t seed) {
    if (n < 64) throw std::invalid_argument("generate_signal: need at least 64 samples");
    if (!(f_lo > 0.0) || !(f_hi >= f_lo) || !(f_hi < 0.5))
        throw std::invalid_argument("generate_signal: band must satisfy 0 < f_lo <= f_hi < 1/2");
    if (!(smoothness_sigma > 0.0))
        throw std::invalid_argument("generate_signal: smoothness must be positive");
    EllipseTrack track = random_ellipse_track(n, f_lo, f_hi, smoothness_sigma, seed);
    return {synthesize_signal(track), std::move(track)};
}

/// Instantaneous covariance track: Sigma[i] is the outer product of row i of
/// the analytic signal with itself (Hermitian, PSD, rank 1).
inline CovarianceTrack instantaneous_covariance(const BivariateSignal& x) {
    x.validate();
    const AnalyticFilter filter(x.n());
    const Eigen::MatrixX2cd a = filter.transform_columns(x.samples);
    CovarianceTrack track;
    track.sigma.resize(x.n());
    for (int i = 0; i < x.n(); ++i)
        track.sigma[i] = a.row(i).adjoint() * a.row(i);
    return track;
}

/// Sum of squared Frobenius norms of consecutive covariance differences.
inline double covariance_smoothness(const BivariateSignal& x) {
    const CovarianceTrack track = instantaneous_covariance(x);
    double total = 0.0;
    for (int i = 1; i < track.n(); ++i)
        total += (track.sigma[i] - track.sigma[i - 1]).squaredNorm();
    return total;
}

/// Reconstruction SNR in dB: 10 log10(||X||_F^2 / ||X - Xhat||_F^2).
/// Returns +infinity for an exact reconstruction.
inline double r_snr_db(const BivariateSignal& reference, const BivariateSignal& estimate) {
    if (reference.n() != estimate.n())
        throw std::invalid_argument("r_snr_db: sample count mismatch");
    const double ref_energy = reference.samples.squaredNorm();
    if (ref_energy == 0.0) throw std::invalid_argument("r_snr_db: zero reference signal");
    const double err_energy = (reference.samples - estimate.samples).squaredNorm();
    if (err_energy == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ref_energy / err_energy);
}

}  // namespace tacos
