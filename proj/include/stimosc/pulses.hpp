#pragma once

// Envelopes and per-channel pulse sequences (flux pump, logical drive,
// blockade probe). Times in ns.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stimosc/fitting.hpp"

namespace stimosc::pulses {

enum class Shape { gaussian, square, plateau };

enum class Channel { flux_pump, logical_drive, blockade_probe };

inline constexpr std::array<Channel, 3> all_channels{Channel::flux_pump, Channel::logical_drive,
                                                      Channel::blockade_probe};

inline std::string to_string(Channel c) {
    switch (c) {
        case Channel::flux_pump: return "flux_pump";
        case Channel::logical_drive: return "logical_drive";
        case Channel::blockade_probe: return "blockade_probe";
    }
    return "unknown";
}

inline Channel channel_from_string(const std::string& name) {
    for (Channel c : all_channels)
        if (to_string(c) == name) return c;
    throw std::invalid_argument("unknown pulse channel '" + name + "'");
}

inline Shape shape_from_string(const std::string& name) {
    if (name == "gaussian") return Shape::gaussian;
    if (name == "square") return Shape::square;
    if (name == "plateau") return Shape::plateau;
    throw std::invalid_argument("unknown envelope shape '" + name + "'");
}

inline std::string to_string(Shape s) {
    switch (s) {
        case Shape::gaussian: return "gaussian";
        case Shape::square: return "square";
        case Shape::plateau: return "plateau";
    }
    return "unknown";
}

struct Envelope {
    Shape shape = Shape::square;
    double amplitude = 1.0;
    double t_start = 0.0;
    double duration = 0.0;
    double sigma = 0.0;  // gaussian only; 0 means duration/4
    double ramp = 0.0;   // plateau only: sin² ramp time on each side
    double phase = 0.0;  // rad; π/2 selects a y rotation

    static Envelope gaussian(double t_start, double duration, double amplitude = 1.0, double phase = 0.0) {
        return {Shape::gaussian, amplitude, t_start, duration, duration / 4.0, 0.0, phase};
    }
    static Envelope square(double t_start, double duration, double amplitude = 1.0, double phase = 0.0) {
        return {Shape::square, amplitude, t_start, duration, 0.0, 0.0, phase};
    }
    static Envelope plateau(double t_start, double duration, double ramp, double amplitude = 1.0, double phase = 0.0) {
        return {Shape::plateau, amplitude, t_start, duration, 0.0, ramp, phase};
    }

    void validate() const {
        if (!(duration > 0.0) || !std::isfinite(duration)) throw std::invalid_argument("envelope duration must be > 0");
        if (!std::isfinite(amplitude) || !std::isfinite(t_start) || !std::isfinite(phase)) {
            throw std::invalid_argument("envelope fields must be finite");
        }
        if (shape == Shape::gaussian && sigma < 0.0) throw std::invalid_argument("gaussian sigma must be >= 0");
        if (shape == Shape::plateau && (ramp < 0.0 || 2.0 * ramp > duration)) {
            throw std::invalid_argument("plateau ramp must satisfy 0 <= 2*ramp <= duration");
        }
    }

    double t_end() const { return t_start + duration; }
    double width() const { return sigma > 0.0 ? sigma : duration / 4.0; }
    double center() const { return t_start + 0.5 * duration; }

    // Real shape factor in [0, 1].
    double shape_at(double t) const {
        const double edge = 1e-12 * std::max(1.0, std::abs(t_end()));
        if (t < t_start - edge || t > t_end() + edge) return 0.0;
        switch (shape) {
            case Shape::square: return 1.0;
            case Shape::gaussian: {
                const double u = (t - center()) / width();
                return std::exp(-0.5 * u * u);
            }
            case Shape::plateau: {
                if (ramp <= 0.0) return 1.0;
                const double rise = (t - t_start) / ramp;
                const double fall = (t_end() - t) / ramp;
                const double x = std::min({rise, fall, 1.0});
                const double s = std::sin(0.5 * M_PI * x);
                return s * s;
            }
        }
        return 0.0;
    }

    std::complex<double> at(double t) const { return amplitude * shape_at(t) * std::polar(1.0, phase); }

    // ∫ shape dt over the window (unit amplitude).
    double shape_area() const {
        switch (shape) {
            case Shape::square: return duration;
            case Shape::gaussian: {
                const double s = width();
                const double half = 0.5 * duration / s;
                return s * std::sqrt(2.0 * M_PI) * std::erf(half / std::sqrt(2.0));
            }
            case Shape::plateau: return duration - ramp;  // each sin² ramp contributes ramp/2
        }
        return 0.0;
    }

    double area() const { return std::abs(amplitude) * shape_area(); }
};

class PulseSequence {
public:
    PulseSequence() = default;
    explicit PulseSequence(double total_duration) : total_(total_duration) {}

    PulseSequence& add(Channel c, const Envelope& e) {
        e.validate();
        auto& list = channels_[c];
        list.push_back(e);
        std::sort(list.begin(), list.end(), [](const Envelope& x, const Envelope& y) { return x.t_start < y.t_start; });
        total_ = std::max(total_, e.t_end());
        return *this;
    }

    PulseSequence& add_readout(double t_start, double duration) {
        if (!(duration > 0.0)) throw std::invalid_argument("readout window duration must be > 0");
        readouts_.emplace_back(t_start, t_start + duration);
        total_ = std::max(total_, t_start + duration);
        return *this;
    }

    void set_total_duration(double t) { total_ = t; }
    double total_duration() const noexcept { return total_; }

    const std::vector<Envelope>& envelopes(Channel c) const {
        static const std::vector<Envelope> empty;
        const auto it = channels_.find(c);
        return it == channels_.end() ? empty : it->second;
    }
    const std::vector<std::pair<double, double>>& readouts() const noexcept { return readouts_; }

    bool has_channel(Channel c) const { return !envelopes(c).empty(); }

    // Non-overlap on each channel, and no readout window during a pump window.
    void validate() const {
        constexpr double eps = 1e-9;
        for (const auto& [c, list] : channels_) {
            for (std::size_t i = 1; i < list.size(); ++i) {
                if (list[i].t_start < list[i - 1].t_end() - eps) {
                    std::ostringstream msg;
                    msg << "overlapping envelopes on channel " << to_string(c) << " at t = " << list[i].t_start
                        << " ns";
                    throw std::invalid_argument(msg.str());
                }
            }
        }
        for (const auto& [r0, r1] : readouts_) {
            for (const auto& e : envelopes(Channel::flux_pump)) {
                if (r0 < e.t_end() - eps && e.t_start < r1 - eps) {
                    std::ostringstream msg;
                    msg << "readout window [" << r0 << ", " << r1 << "] ns overlaps flux pump";
                    throw std::invalid_argument(msg.str());
                }
            }
        }
        if (total_ < 0.0) throw std::invalid_argument("total duration must be >= 0");
    }

    std::complex<double> sample(Channel c, double t) const {
        if (t < -1e-9 || t > total_ + 1e-9) {
            std::ostringstream msg;
            msg << "sample time " << t << " ns outside [0, " << total_ << "]";
            throw std::out_of_range(msg.str());
        }
        std::complex<double> v = 0.0;
        for (const auto& e : envelopes(c)) {
            if (t >= e.t_start && t <= e.t_end()) v += e.at(t);
        }
        return v;
    }

    std::complex<double> sample(const std::string& channel, double t) const {
        return sample(channel_from_string(channel), t);
    }

    // Pump windows as [start, end] pairs.
    std::vector<std::pair<double, double>> windows(Channel c) const {
        std::vector<std::pair<double, double>> out;
        for (const auto& e : envelopes(c)) out.emplace_back(e.t_start, e.t_end());
        return out;
    }

    // Waveform dump: time_ns plus re/im columns per channel.
    void write_csv(std::ostream& os, double dt) const {
        if (!(dt > 0.0)) throw std::invalid_argument("write_csv: dt must be > 0");
        os << "time_ns";
        for (Channel c : all_channels) os << ',' << to_string(c) << "_re," << to_string(c) << "_im";
        os << '\n';
        os << std::setprecision(12);
        const auto steps = static_cast<long>(std::floor(total_ / dt + 1e-9));
        for (long i = 0; i <= steps; ++i) {
            const double t = i * dt;
            os << t;
            for (Channel c : all_channels) {
                const auto v = sample(c, t);
                os << ',' << v.real() << ',' << v.imag();
            }
            os << '\n';
        }
    }

private:
    double total_ = 0.0;
    std::map<Channel, std::vector<Envelope>> channels_;
    std::vector<std::pair<double, double>> readouts_;
};

struct PiCalibration {
    double pi_amplitude = 0.0;
    double half_pi_amplitude = 0.0;  // half the π pulse area at the same shape
    double peak_response = 0.0;
};

// Amplitude (in rad/ns, drive convention ε(a† + a)) whose pulse area gives a
// π rotation of an ideal two-level system: 2·ε·area = π.
inline double ideal_pi_amplitude(const Envelope& shape) { return M_PI / (2.0 * shape.shape_area()); }

// Golden-section maximization of a population response over amplitude.
// `response` receives the template with its amplitude replaced.
inline PiCalibration calibrate_pi_pulse(const Envelope& shape, const std::function<double(const Envelope&)>& response,
                                        std::optional<std::pair<double, double>> window = std::nullopt,
                                        double tol = 1e-5) {
    if (!(shape.duration > 0.0)) throw std::invalid_argument("calibrate_pi_pulse: zero-duration pulse has no maximum");
    shape.validate();
    const double guess = ideal_pi_amplitude(shape);
    const auto [lo, hi] = window.value_or(std::make_pair(0.5 * guess, 1.5 * guess));
    auto f = [&](double amp) {
        Envelope e = shape;
        e.amplitude = amp;
        return response(e);
    };
    const auto best = fit::golden_section_max(f, lo, hi, tol);
    const double edge = 1e-3 * (hi - lo);
    const double f_lo = f(lo), f_hi = f(hi);
    if (best.x - lo < edge || hi - best.x < edge || best.value <= std::max(f_lo, f_hi)) {
        std::ostringstream msg;
        msg << "calibrate_pi_pulse: no interior maximum in [" << lo << ", " << hi << "]";
        throw std::runtime_error(msg.str());
    }
    return {best.x, 0.5 * best.x, best.value};
}

}  // namespace stimosc::pulses
