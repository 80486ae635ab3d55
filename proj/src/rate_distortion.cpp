#include "compresslab/rate_distortion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>

#include "compresslab/errors.hpp"

namespace compresslab {

double DecayFit::operator()(double rate) const { return c * std::exp(-b * rate) + d0; }

double accuracy_distortion(std::span<const bool> judgments) {
    if (judgments.empty()) throw std::invalid_argument("accuracy_distortion needs at least one judgment");
    const auto correct = std::count(judgments.begin(), judgments.end(), true);
    return 1.0 - static_cast<double>(correct) / static_cast<double>(judgments.size());
}

double accuracy_distortion(const std::vector<bool>& judgments) {
    if (judgments.empty()) throw std::invalid_argument("accuracy_distortion needs at least one judgment");
    const auto correct = std::count(judgments.begin(), judgments.end(), true);
    return 1.0 - static_cast<double>(correct) / static_cast<double>(judgments.size());
}

double cosine_distortion(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_distortion: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_distortion: zero vector");
    return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

double gaussian_reference(const GaussianSource& src, double rate_bits) {
    if (!(src.variance > 0.0)) throw std::invalid_argument("gaussian source variance must be > 0");
    if (!(rate_bits >= 0.0)) throw std::invalid_argument("rate must be >= 0");
    return src.variance * std::exp2(-2.0 * rate_bits);
}

namespace {

struct Problem {
    std::vector<double> r, d, w;

    double rss(const Eigen::Vector3d& p) const {
        double s = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            const double e = d[k] - (p[0] * std::exp(-p[1] * r[k]) + p[2]);
            s += w[k] * e * e;
        }
        return s;
    }
};

Eigen::Vector3d project(Eigen::Vector3d p) {
    p[0] = std::max(p[0], 0.0);
    p[1] = std::max(p[1], 0.0);
    p[2] = std::clamp(p[2], 0.0, 1.0);
    return p;
}

// Weighted linear least squares for (c, d0) with b held fixed.
Eigen::Vector3d linear_start(const Problem& pr, double b) {
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < pr.r.size(); ++k) {
        const Eigen::Vector2d x(std::exp(-b * pr.r[k]), 1.0);
        a += pr.w[k] * x * x.transpose();
        rhs += pr.w[k] * pr.d[k] * x;
    }
    const Eigen::Vector2d sol = a.ldlt().solve(rhs);
    return project(Eigen::Vector3d(sol[0], b, sol[1]));
}

struct Run {
    Eigen::Vector3d p;
    double rss;
    bool converged;
};

Run levenberg_marquardt(const Problem& pr, Eigen::Vector3d p, const FitOptions& opt) {
    double rss = pr.rss(p);
    double lambda = 1e-3;
    for (int it = 0; it < opt.max_iterations; ++it) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < pr.r.size(); ++k) {
            const double e = std::exp(-p[1] * pr.r[k]);
            const Eigen::Vector3d g(e, -p[0] * pr.r[k] * e, 1.0);
            const double res = pr.d[k] - (p[0] * e + p[2]);
            jtj += pr.w[k] * g * g.transpose();
            jtr += pr.w[k] * res * g;
        }
        // try increasingly damped steps until one lowers the residual
        while (true) {
            Eigen::Matrix3d a = jtj;
            for (int q = 0; q < 3; ++q) a(q, q) += lambda * (jtj(q, q) + 1e-12);
            const Eigen::Vector3d cand = project(p + a.ldlt().solve(jtr));
            const double step = (cand - p).norm();
            const double cand_rss = pr.rss(cand);
            if (std::isfinite(cand_rss) && cand_rss <= rss) {
                p = cand;
                rss = cand_rss;
                lambda = std::max(lambda / 10.0, 1e-12);
                if (step < opt.step_tolerance) return {p, rss, true};
                break;
            }
            if (step < opt.step_tolerance || lambda > 1e16) return {p, rss, true};
            lambda *= 10.0;
        }
    }
    return {p, rss, false};
}

}  // namespace

DecayFit fit_decay(std::vector<RatePoint> points, const FitOptions& options) {
    if (points.size() < 3) throw std::invalid_argument("fit_decay needs at least 3 points");
    std::sort(points.begin(), points.end(), [](const RatePoint& x, const RatePoint& y) {
        return std::tie(x.rate, x.distortion, x.stderr_d) < std::tie(y.rate, y.distortion, y.stderr_d);
    });
    std::set<double> rates;
    Problem pr;
    for (const auto& pt : points) {
        if (!(pt.rate >= 0.0) || !std::isfinite(pt.rate)) throw std::invalid_argument("rates must be finite and >= 0");
        if (!(pt.distortion >= 0.0 && pt.distortion <= 1.0)) throw std::invalid_argument("distortion must be in [0, 1]");
        rates.insert(pt.rate);
        pr.r.push_back(pt.rate);
        pr.d.push_back(pt.distortion);
        pr.w.push_back(options.weighted && pt.stderr_d > 0.0 ? 1.0 / (pt.stderr_d * pt.stderr_d) : 1.0);
    }
    if (rates.size() < 2) throw std::invalid_argument("fit_decay needs at least 2 distinct rates");

    const double max_rate = *rates.rbegin();
    Run best{Eigen::Vector3d::Zero(), std::numeric_limits<double>::infinity(), false};
    for (double scale : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const Run run = levenberg_marquardt(pr, linear_start(pr, scale / max_rate), options);
        if (run.rss < best.rss) best = run;
    }

    const double wsum = std::accumulate(pr.w.begin(), pr.w.end(), 0.0);
    double mean = 0.0;
    for (std::size_t k = 0; k < pr.d.size(); ++k) mean += pr.w[k] * pr.d[k];
    mean /= wsum;
    const Eigen::Vector3d flat(0.0, 0.0, mean);
    const double flat_rss = pr.rss(flat);

    DecayFit fit;
    fit.n_points = points.size();
    if (!(best.rss < flat_rss)) {
        fit.d0 = mean;
        fit.rss = flat_rss;
        return fit;
    }
    fit.c = best.p[0];
    fit.b = best.p[0] == 0.0 ? 0.0 : best.p[1];  // b is unidentified without a decay term
    fit.d0 = best.p[2];
    fit.rss = best.rss;
    fit.converged = best.converged;
    return fit;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cells.back() += '"';
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cells.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.emplace_back();
        } else if (ch != '\r') {
            cells.back() += ch;
        }
    }
    return cells;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<RatePoint> read_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--points", "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DatasetError(1, "empty points file");
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_rate = column("rate"), c_dist = column("distortion");
    const int c_label = column("label"), c_se = column("stderr_d");
    if (c_rate < 0 || c_dist < 0) throw DatasetError(1, "header must contain rate and distortion columns");

    std::vector<RatePoint> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        auto cell = [&](int c) -> const std::string& {
            if (c >= static_cast<int>(cells.size())) throw DatasetError(line_no, "too few columns");
            return cells[static_cast<std::size_t>(c)];
        };
        try {
            RatePoint p;
            p.rate = std::stod(cell(c_rate));
            p.distortion = std::stod(cell(c_dist));
            if (c_label >= 0) p.label = cell(c_label);
            if (c_se >= 0 && !cell(c_se).empty()) p.stderr_d = std::stod(cell(c_se));
            points.push_back(std::move(p));
        } catch (const std::logic_error&) {
            throw DatasetError(line_no, "non-numeric rate, distortion or stderr_d");
        }
    }
    return points;
}

void write_points_csv(std::ostream& out, std::span<const RatePoint> points) {
    out << "rate,distortion,label,stderr_d\n";
    for (const auto& p : points) {
        out << num(p.rate) << ',' << num(p.distortion) << ',' << csv_field(p.label) << ',' << num(p.stderr_d) << '\n';
    }
}

void write_fit_csv(std::ostream& out, std::span<const RatePoint> points, const DecayFit& fit) {
    out << "rate,distortion,fitted_distortion,label\n";
    for (const auto& p : points) {
        out << num(p.rate) << ',' << num(p.distortion) << ',' << num(fit(p.rate)) << ',' << csv_field(p.label) << '\n';
    }
}

void to_json(Json& j, const DecayFit& f) {
    j = Json{{"c", f.c}, {"b", f.b}, {"d0", f.d0}, {"rss", f.rss}, {"n_points", f.n_points}, {"converged", f.converged}};
}

}  // namespace compresslab
