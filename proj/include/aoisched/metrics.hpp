#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace aoisched {

/// One status update: generation and reception instants, seconds.
struct UpdatePacket {
    double generated = 0.0;
    double received = 0.0;
};

/// An ordered FCFS update trace. Generation times strictly increase,
/// reception times strictly increase, and no packet is received before it is
/// generated. Out-of-order receptions are rejected at construction.
class UpdateTrace {
public:
    UpdateTrace() = default;
    explicit UpdateTrace(std::vector<UpdatePacket> packets);

    const std::vector<UpdatePacket>& packets() const { return packets_; }
    std::size_t size() const { return packets_.size(); }
    bool empty() const { return packets_.empty(); }

    /// Interarrival time X_n = t_n - t_{n-1}; defined for n >= 2 (1-based).
    double interarrival(std::size_t n) const;
    /// System time T_n = t'_n - t_n.
    double system_time(std::size_t n) const;

private:
    std::vector<UpdatePacket> packets_;
};

/// Age at time t: t minus the generation instant of the newest packet received
/// by t. Before any reception the age ramps from a0 at the observation start
/// (default start: the first generation instant).
double aoi_at(const UpdateTrace& trace, double t, double a0 = 0.0,
              std::optional<double> start = std::nullopt);

/// Exact time average of the age sawtooth over [t_a, t_b] (closed-form
/// trapezoids, no quadrature error).
double average_aoi(const UpdateTrace& trace, double t_a, double t_b,
                   double a0 = 0.0, std::optional<double> start = std::nullopt);

/// Peak age A_n = X_n + T_n just before each reception; defined for n >= 2,
/// so the first packet is excluded (X_1 has no predecessor).
std::vector<double> peak_aoi(const UpdateTrace& trace);

/// Value of each update, X_n / A_n in (0, 1]; aligned with peak_aoi.
std::vector<double> voiu(const UpdateTrace& trace);

/// Non-negative, non-decreasing age penalty. Polynomial penalties up to degree
/// 2 integrate in closed form; anything else goes through adaptive quadrature.
class PenaltyFunction {
public:
    /// c0 + c1*a + c2*a^2; coefficients are checked analytically.
    static PenaltyFunction polynomial(double c0, double c1, double c2 = 0.0);
    static PenaltyFunction linear() { return polynomial(0.0, 1.0); }
    static PenaltyFunction constant(double c) { return polynomial(c, 0.0); }
    /// Arbitrary evaluator; monotonicity spot-checked on a sampled grid.
    static PenaltyFunction custom(std::function<double(double)> fn);

    double operator()(double age) const;
    bool is_polynomial() const { return polynomial_; }
    double coeff(int k) const { return coeff_[k]; }

private:
    PenaltyFunction() = default;
    bool polynomial_ = false;
    double coeff_[3] = {0.0, 0.0, 0.0};
    std::function<double(double)> fn_;
};

/// Time average of penalty(age) over [t_a, t_b]; exact for polynomial
/// penalties, adaptive quadrature (rel. tol 1e-8) otherwise.
double average_coud(const UpdateTrace& trace, const PenaltyFunction& penalty,
                    double t_a, double t_b, double a0 = 0.0,
                    std::optional<double> start = std::nullopt);

/// Positive-valued sampler driven by the supplied RNG.
using Sampler = std::function<double(std::mt19937_64&)>;

/// FCFS single-server queue: the first packet is generated at time 0,
/// interarrivals accumulate, and t'_n = max(t_n, t'_{n-1}) + service_n.
/// Deterministic for a given seed (per packet: interarrival draw, then
/// service draw; the first packet draws service only).
UpdateTrace simulate_fcfs_queue(const Sampler& interarrival, const Sampler& service,
                                std::size_t packet_count, std::uint64_t seed);

/// Trace CSV ("n,t_gen,t_recv") read/write.
UpdateTrace read_trace_csv(std::istream& in);
UpdateTrace load_trace_csv(const std::string& path);
void write_trace_csv(const UpdateTrace& trace, std::ostream& out);

/// Metric report CSVs: a "metric,value" summary and a per-packet
/// "n,X,T,A,voiu" table (row n=1 leaves X/A/voiu blank).
void write_metrics_summary_csv(const UpdateTrace& trace, const PenaltyFunction& penalty,
                               double t_a, double t_b, double a0, std::ostream& out);
void write_per_packet_csv(const UpdateTrace& trace, std::ostream& out);

}  // namespace aoisched
