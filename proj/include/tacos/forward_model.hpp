#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tacos/fft.hpp"
#include "tacos/rng.hpp"
#include "tacos/signal.hpp"

namespace tacos {

/// One measurement channel: y = T (X r) with T a real diagonal operator in
/// the frequency domain (gain per DFT bin) and r the 2-vector mixing the
/// signal components. After whitening the noise covariance is the identity.
struct ChannelModel {
    Eigen::VectorXd spectral_gain;  // per-bin gain, even-symmetric so T maps real to real
    Eigen::Vector2d mix;

    int n() const { return static_cast<int>(spectral_gain.size()); }

    void validate() const {
        if (n() < 2) throw std::invalid_argument("ChannelModel: need at least 2 bins");
        if (!spectral_gain.allFinite() || (spectral_gain.array() == 0.0).any())
            throw std::invalid_argument("ChannelModel: gains must be finite and nonzero");
        if (!mix.allFinite() || (mix[0] == 0.0 && mix[1] == 0.0))
            throw std::invalid_argument("ChannelModel: mixing vector must be finite and nonzero");
    }
};

/// Colored-noise description: per-channel amplitude spectral density
/// alpha[k] ~ U(0, sigma) and phase[k] ~ U(0, 2*pi), with conjugate symmetry
/// (alpha mirrored, phase negated, DC/Nyquist phases in {0, pi}) so the
/// synthesized noise is real. The ASD is stated against the unitary DFT:
/// |DFT(eps)[k]| / sqrt(N) == alpha[k] exactly.
struct NoiseSpec {
    double sigma = 1.0;
    std::vector<Eigen::VectorXd> asd;    // one length-N vector per channel
    std::vector<Eigen::VectorXd> phase;  // matching phases

    int n() const { return asd.empty() ? 0 : static_cast<int>(asd.front().size()); }
    int channels() const { return static_cast<int>(asd.size()); }
};

/// Draws the amplitude and phase spectra for each channel. Deterministic per
/// seed; sigma must be positive.
inline NoiseSpec sample_noise_spec(int n, int channels, double sigma, std::uint64_t seed) {
    using std::numbers::pi;
    if (n < 2) throw std::invalid_argument("sample_noise_spec: need at least 2 samples");
    if (channels < 1) throw std::invalid_argument("sample_noise_spec: need at least one channel");
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_noise_spec: sigma must be positive");

    NoiseSpec spec;
    spec.sigma = sigma;
    spec.asd.resize(channels);
    spec.phase.resize(channels);
    for (int d = 0; d < channels; ++d) {
        Rng rng(derive_seed(seed, "noise-channel", static_cast<std::uint64_t>(d)));
        Eigen::VectorXd alpha(n), phi(n);
        alpha[0] = rng.uniform(0.0, sigma);
        phi[0] = rng.uniform() < 0.5 ? 0.0 : pi;  // keep the DC bin real
        for (int k = 1; k < (n + 1) / 2; ++k) {
            alpha[k] = rng.uniform(0.0, sigma);
            phi[k] = rng.uniform(0.0, 2 * pi);
            alpha[n - k] = alpha[k];
            phi[n - k] = -phi[k];
        }
        if (n % 2 == 0) {
            alpha[n / 2] = rng.uniform(0.0, sigma);
            phi[n / 2] = rng.uniform() < 0.5 ? 0.0 : pi;
        }
        spec.asd[d] = std::move(alpha);
        spec.phase[d] = std::move(phi);
    }
    return spec;
}

/// eps_d = unitary IDFT of alpha_d exp(j phi_d); exactly real by the
/// conjugate symmetry of the spectrum.
inline std::vector<Eigen::VectorXd> noise_realization(const NoiseSpec& spec) {
    const int n = spec.n();
    const Fft& fft = shared_fft(n);
    const double scale = std::sqrt(static_cast<double>(n));
    std::vector<Eigen::VectorXd> noise(spec.channels());
    for (int d = 0; d < spec.channels(); ++d) {
        Eigen::VectorXcd spectrum(n);
        for (int k = 0; k < n; ++k)
            spectrum[k] = std::polar(scale * spec.asd[d][k], spec.phase[d][k]);
        const Eigen::VectorXcd eps = fft.inverse(spectrum);
        if (eps.imag().cwiseAbs().maxCoeff() > 1e-12 * (1.0 + spec.sigma))
            throw std::runtime_error("noise_realization: spectrum lost conjugate symmetry");
        noise[d] = eps.real();
    }
    return noise;
}

/// Builds the whitening channels T_d = per-bin gain 1 / alpha_d[k]. Bins with
/// alpha below clamp_floor_rel * sigma are clamped there (a U(0, sigma) draw
/// puts mass arbitrarily close to zero); the number of clamped bins is
/// reported through clamped_count when given.
inline std::vector<ChannelModel> whitening_channels(const NoiseSpec& spec,
                                                    const std::vector<Eigen::Vector2d>& mix,
                                                    double clamp_floor_rel = 1e-6,
                                                    int* clamped_count = nullptr) {
    if (static_cast<int>(mix.size()) != spec.channels())
        throw std::invalid_argument("whitening_channels: one mixing vector per channel required");
    const double floor = clamp_floor_rel * spec.sigma;
    int clamped = 0;
    std::vector<ChannelModel> channels(spec.channels());
    for (int d = 0; d < spec.channels(); ++d) {
        Eigen::VectorXd gain(spec.n());
        for (int k = 0; k < spec.n(); ++k) {
            const double a = spec.asd[d][k];
            if (a < floor) ++clamped;
            gain[k] = 1.0 / std::max(a, floor);
        }
        channels[d] = ChannelModel{std::move(gain), mix[d]};
        channels[d].validate();
    }
    if (clamped_count != nullptr) *clamped_count = clamped;
    return channels;
}

/// Mixing vectors with independent standard normal entries.
inline std::vector<Eigen::Vector2d> random_mixing_vectors(int channels, std::uint64_t seed) {
    std::vector<Eigen::Vector2d> mix(channels);
    Rng rng(derive_seed(seed, "mixing"));
    for (auto& r : mix) {
        r[0] = rng.normal();
        r[1] = rng.normal();
    }
    return mix;
}

/// Phi(X): one vector T_d (X r_d) per channel.
inline std::vector<Eigen::VectorXd> apply_forward(const std::vector<ChannelModel>& channels,
                                                  const Eigen::MatrixX2d& x) {
    std::vector<Eigen::VectorXd> out(channels.size());
    for (size_t d = 0; d < channels.size(); ++d) {
        if (channels[d].n() != x.rows())
            throw std::invalid_argument("apply_forward: channel/signal length mismatch");
        out[d] = apply_spectral_gain_real(channels[d].spectral_gain,
                                          Eigen::VectorXd(x * channels[d].mix));
    }
    return out;
}

/// Phi^H applied to per-channel residuals: sum_d Re{T_d^H res_d} r_d^T.
/// T_d has a real gain vector, so T_d^H applies the same gains.
inline Eigen::MatrixX2d apply_adjoint(const std::vector<ChannelModel>& channels,
                                      const std::vector<Eigen::VectorXd>& residuals) {
    if (channels.size() != residuals.size())
        throw std::invalid_argument("apply_adjoint: one residual per channel required");
    if (channels.empty()) throw std::invalid_argument("apply_adjoint: no channels");
    const int n = channels.front().n();
    Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(n, 2);
    for (size_t d = 0; d < channels.size(); ++d) {
        if (residuals[d].size() != n)
            throw std::invalid_argument("apply_adjoint: residual length mismatch");
        out += apply_spectral_gain_real(channels[d].spectral_gain, residuals[d]) *
               channels[d].mix.transpose();
    }
    return out;
}

/// The observation pipeline of the synthetic experiments: mix the signal,
/// add the colored noise, whiten. The whitened noise has unit ASD in every
/// unclamped bin.
inline std::vector<Eigen::VectorXd> whitened_observations(
    const std::vector<ChannelModel>& channels, const BivariateSignal& x,
    const std::vector<Eigen::VectorXd>& noise) {
    if (channels.size() != noise.size())
        throw std::invalid_argument("whitened_observations: channel/noise count mismatch");
    std::vector<Eigen::VectorXd> obs(channels.size());
    for (size_t d = 0; d < channels.size(); ++d) {
        const Eigen::VectorXd mixed = x.samples * channels[d].mix + noise[d];
        obs[d] = apply_spectral_gain_real(channels[d].spectral_gain, mixed);
    }
    return obs;
}

}  // namespace tacos
