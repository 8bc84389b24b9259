#include "aoisched/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "aoisched/errors.hpp"

namespace aoisched {

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

}  // namespace

UpdateTrace::UpdateTrace(std::vector<UpdatePacket> packets) : packets_(std::move(packets)) {
    for (std::size_t i = 0; i < packets_.size(); ++i) {
        const UpdatePacket& p = packets_[i];
        if (!(p.received >= p.generated))
            throw InvalidRequestError("packet received before it was generated");
        if (i > 0) {
            if (!(p.generated > packets_[i - 1].generated))
                throw InvalidRequestError("generation times must strictly increase");
            if (!(p.received > packets_[i - 1].received))
                throw InvalidRequestError("reception times must strictly increase (FCFS)");
        }
    }
}

double UpdateTrace::interarrival(std::size_t n) const {
    if (n < 2 || n > packets_.size())
        throw InvalidRequestError("interarrival defined for packets 2..N");
    return packets_[n - 1].generated - packets_[n - 2].generated;
}

double UpdateTrace::system_time(std::size_t n) const {
    if (n < 1 || n > packets_.size())
        throw InvalidRequestError("packet index out of range");
    return packets_[n - 1].received - packets_[n - 1].generated;
}

namespace {

double observation_start(const UpdateTrace& trace, const std::optional<double>& start) {
    if (start) return *start;
    if (trace.empty())
        throw InvalidRequestError("empty trace needs an explicit observation start");
    return trace.packets().front().generated;
}

// Generation instant backing the age at time t, or the virtual origin
// start - a0 when nothing has been received yet.
double age_origin(const UpdateTrace& trace, double t, double a0, double start) {
    const auto& ps = trace.packets();
    auto it = std::upper_bound(ps.begin(), ps.end(), t,
                               [](double v, const UpdatePacket& p) { return v < p.received; });
    if (it == ps.begin()) return start - a0;
    return std::prev(it)->generated;
}

}  // namespace

double aoi_at(const UpdateTrace& trace, double t, double a0, std::optional<double> start) {
    const double t0 = observation_start(trace, start);
    if (t < t0) throw InvalidRequestError("query time precedes observation start");
    if (a0 < 0.0) throw InvalidRequestError("initial age must be nonnegative");
    return t - age_origin(trace, t, a0, t0);
}

namespace {

// Walks the sawtooth over [t_a, t_b] and feeds each linear piece
// (u, v, age-at-u) to `piece`. Pieces are maximal intervals with no reception
// strictly inside.
template <typename F>
void for_each_linear_piece(const UpdateTrace& trace, double t_a, double t_b, double a0,
                           double start, F&& piece) {
    const auto& ps = trace.packets();
    double u = t_a;
    double origin = age_origin(trace, t_a, a0, start);
    auto it = std::upper_bound(ps.begin(), ps.end(), t_a,
                               [](double v, const UpdatePacket& p) { return v < p.received; });
    for (; it != ps.end() && it->received < t_b; ++it) {
        if (it->received > u) {
            piece(u, it->received, u - origin);
            u = it->received;
        }
        origin = it->generated;
    }
    if (t_b > u) piece(u, t_b, u - origin);
}

}  // namespace

double average_aoi(const UpdateTrace& trace, double t_a, double t_b, double a0,
                   std::optional<double> start) {
    const double t0 = observation_start(trace, start);
    if (!(t_b > t_a)) throw InvalidRequestError("empty averaging window");
    if (t_a < t0) throw InvalidRequestError("window precedes observation start");
    double area = 0.0;
    for_each_linear_piece(trace, t_a, t_b, a0, t0, [&](double u, double v, double age_u) {
        const double w = v - u;
        area += w * (age_u + 0.5 * w);
    });
    return area / (t_b - t_a);
}

std::vector<double> peak_aoi(const UpdateTrace& trace) {
    if (trace.size() < 2)
        throw InvalidRequestError("peak age needs at least two packets");
    std::vector<double> peaks(trace.size() - 1);
    for (std::size_t n = 2; n <= trace.size(); ++n)
        peaks[n - 2] = trace.interarrival(n) + trace.system_time(n);
    return peaks;
}

std::vector<double> voiu(const UpdateTrace& trace) {
    std::vector<double> values = peak_aoi(trace);
    for (std::size_t n = 2; n <= trace.size(); ++n)
        values[n - 2] = trace.interarrival(n) / values[n - 2];
    return values;
}

PenaltyFunction PenaltyFunction::polynomial(double c0, double c1, double c2) {
    if (c0 < 0.0 || c1 < 0.0 || c2 < 0.0)
        throw InvalidRequestError(
            "invalid penalty: polynomial coefficients must be nonnegative for a "
            "non-decreasing, non-negative penalty on [0, inf)");
    PenaltyFunction f;
    f.polynomial_ = true;
    f.coeff_[0] = c0;
    f.coeff_[1] = c1;
    f.coeff_[2] = c2;
    return f;
}

PenaltyFunction PenaltyFunction::custom(std::function<double(double)> fn) {
    if (!fn) throw InvalidRequestError("invalid penalty: empty evaluator");
    // spot check monotonicity and sign on a geometric grid
    double prev = fn(0.0);
    if (!(prev >= 0.0)) throw InvalidRequestError("invalid penalty: f(0) must be >= 0");
    for (double a = 1e-3; a <= 1e6; a *= 1.7782794100389228) {
        const double cur = fn(a);
        if (std::isnan(cur) || cur + 1e-12 * std::max(1.0, std::abs(prev)) < prev)
            throw InvalidRequestError("invalid penalty: not non-decreasing in age");
        prev = cur;
    }
    PenaltyFunction f;
    f.fn_ = std::move(fn);
    return f;
}

double PenaltyFunction::operator()(double age) const {
    if (polynomial_) return coeff_[0] + age * (coeff_[1] + age * coeff_[2]);
    return fn_(age);
}

namespace {

// integral of c0 + c1*x + c2*x^2 over [lo, hi]
double poly_integral(const PenaltyFunction& f, double lo, double hi) {
    auto anti = [&](double x) {
        return x * (f.coeff(0) + x * (f.coeff(1) / 2.0 + x * f.coeff(2) / 3.0));
    };
    return anti(hi) - anti(lo);
}

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double f_lo, double f_mid, double f_hi, double whole, double tol,
                        int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), mh = 0.5 * (mid + hi);
    const double f_lm = f(lm), f_mh = f(mh);
    const double left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid);
    const double right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_mh + f_hi);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol)
        return left + right + err / 15.0;
    return adaptive_simpson(f, lo, mid, f_lo, f_lm, f_mid, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, mid, hi, f_mid, f_mh, f_hi, right, tol / 2.0, depth - 1);
}

}  // namespace

double average_coud(const UpdateTrace& trace, const PenaltyFunction& penalty, double t_a,
                    double t_b, double a0, std::optional<double> start) {
    const double t0 = observation_start(trace, start);
    if (!(t_b > t_a)) throw InvalidRequestError("empty averaging window");
    if (t_a < t0) throw InvalidRequestError("window precedes observation start");
    double total = 0.0;
    for_each_linear_piece(trace, t_a, t_b, a0, t0, [&](double u, double v, double age_u) {
        if (penalty.is_polynomial()) {
            total += poly_integral(penalty, age_u, age_u + (v - u));
            return;
        }
        auto f = [&](double t) { return penalty(age_u + (t - u)); };
        const double mid = 0.5 * (u + v);
        const double f_lo = f(u), f_mid = f(mid), f_hi = f(v);
        const double whole = (v - u) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
        const double tol = 1e-8 * std::max(std::abs(whole), 1e-300);
        total += adaptive_simpson(f, u, v, f_lo, f_mid, f_hi, whole, tol, 50);
    });
    return total / (t_b - t_a);
}

UpdateTrace simulate_fcfs_queue(const Sampler& interarrival, const Sampler& service,
                                std::size_t packet_count, std::uint64_t seed) {
    if (packet_count < 1) throw InvalidRequestError("need at least one packet");
    std::mt19937_64 rng(seed);
    auto draw = [&](const Sampler& s, const char* what) {
        const double v = s(rng);
        if (!(v > 0.0))
            throw InvalidRequestError(std::string("sampler produced a non-positive ") + what);
        return v;
    };
    std::vector<UpdatePacket> packets(packet_count);
    double t = 0.0, done = 0.0;
    for (std::size_t n = 0; n < packet_count; ++n) {
        if (n > 0) t += draw(interarrival, "interarrival");
        done = std::max(t, done) + draw(service, "service time");
        packets[n] = {t, done};
    }
    return UpdateTrace(std::move(packets));
}

UpdateTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("trace CSV: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "n,t_gen,t_recv")
        throw IoError("trace CSV: expected header 'n,t_gen,t_recv', got '" + line + "'");
    std::vector<UpdatePacket> packets;
    std::size_t expected = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        double vals[3];
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(row, field, ','))
                throw IoError("trace CSV: malformed row '" + line + "'");
            try {
                vals[i] = std::stod(field);
            } catch (const std::exception&) {
                throw IoError("trace CSV: non-numeric field '" + field + "'");
            }
        }
        if (static_cast<std::size_t>(vals[0]) != expected)
            throw IoError("trace CSV: packet numbers must run 1..N");
        ++expected;
        packets.push_back({vals[1], vals[2]});
    }
    return UpdateTrace(std::move(packets));  // construction re-validates ordering
}

UpdateTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    return read_trace_csv(in);
}

void write_trace_csv(const UpdateTrace& trace, std::ostream& out) {
    out << "n,t_gen,t_recv\n";
    for (std::size_t n = 1; n <= trace.size(); ++n) {
        const UpdatePacket& p = trace.packets()[n - 1];
        out << n << ',' << fmt(p.generated) << ',' << fmt(p.received) << '\n';
    }
}

void write_metrics_summary_csv(const UpdateTrace& trace, const PenaltyFunction& penalty,
                               double t_a, double t_b, double a0, std::ostream& out) {
    out << "metric,value\n";
    out << "packets," << trace.size() << '\n';
    out << "window_start," << fmt(t_a) << '\n';
    out << "window_end," << fmt(t_b) << '\n';
    out << "initial_age," << fmt(a0) << '\n';
    out << "average_aoi," << fmt(average_aoi(trace, t_a, t_b, a0)) << '\n';
    out << "average_coud," << fmt(average_coud(trace, penalty, t_a, t_b, a0)) << '\n';
    if (trace.size() >= 2) {
        const auto peaks = peak_aoi(trace);
        const auto values = voiu(trace);
        const double peak_sum = std::accumulate(peaks.begin(), peaks.end(), 0.0);
        const double voiu_sum = std::accumulate(values.begin(), values.end(), 0.0);
        out << "mean_peak_aoi," << fmt(peak_sum / peaks.size()) << '\n';
        out << "max_peak_aoi," << fmt(*std::max_element(peaks.begin(), peaks.end())) << '\n';
        out << "mean_voiu," << fmt(voiu_sum / values.size()) << '\n';
        out << "min_voiu," << fmt(*std::min_element(values.begin(), values.end())) << '\n';
    }
}

void write_per_packet_csv(const UpdateTrace& trace, std::ostream& out) {
    out << "n,X,T,A,voiu\n";
    for (std::size_t n = 1; n <= trace.size(); ++n) {
        out << n << ',';
        if (n == 1) {
            // X_1 undefined, so A_1 and voiu_1 are excluded by design
            out << ',' << fmt(trace.system_time(n)) << ",,\n";
            continue;
        }
        const double x = trace.interarrival(n);
        const double t = trace.system_time(n);
        out << fmt(x) << ',' << fmt(t) << ',' << fmt(x + t) << ',' << fmt(x / (x + t))
            << '\n';
    }
}

}  // namespace aoisched
