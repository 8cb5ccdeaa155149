#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stormbench/evaluate/forecast.hpp"
#include "stormbench/util/format.hpp"

namespace stormbench {

/// One evaluated model in a report.
struct ModelScore {
    std::string model;   // label, unique within a report
    std::string family;
    std::string budget;  // empty outside sweeps
    std::size_t params = 0;
    std::uint64_t seed = 0;
    ForecastScores scores;
    double seconds_per_epoch = std::numeric_limits<double>::quiet_NaN();
    std::size_t peak_mem_bytes = 0;
    std::optional<std::size_t> blowup_step;
};

namespace detail {

inline std::string optional_step(const std::optional<std::size_t>& s) { return s ? std::to_string(*s) : ""; }

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

}  // namespace detail

/// model,family,params,seed,lead,rmse,acc with one row per lead time.
inline void write_lead_csv(const std::vector<ModelScore>& rows, const std::string& path) {
    auto out = detail::open_out(path);
    out << "model,family,params,seed,lead,rmse,acc\n";
    for (const auto& r : rows) {
        const auto& per = r.scores.rmse.per_lead;
        for (std::size_t s = 0; s < per.size(); ++s) {
            const double a = s < r.scores.acc.size() ? r.scores.acc[s] : std::numeric_limits<double>::quiet_NaN();
            out << r.model << ',' << r.family << ',' << r.params << ',' << r.seed << ',' << s + 1 << ','
                << format_double(per[s]) << ',' << format_double(a) << '\n';
        }
    }
}

/// model,params,mean_rmse,seconds_per_epoch,peak_mem_bytes,blowup_step,final_rmse.
inline void write_summary_csv(const std::vector<ModelScore>& rows, const std::string& path) {
    auto out = detail::open_out(path);
    out << "model,params,mean_rmse,seconds_per_epoch,peak_mem_bytes,blowup_step,final_rmse\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.params << ',' << format_double(r.scores.rmse.mean) << ','
            << format_double(r.seconds_per_epoch) << ',' << r.peak_mem_bytes << ',' << detail::optional_step(r.blowup_step)
            << ',' << format_double(r.scores.rmse.final()) << '\n';
}

/// Mean and spread of one family's mean RMSE at one budget, over seeds.
struct BudgetPoint {
    std::string family, budget;
    double params = 0.0;  // mean over seeds
    double mean = 0.0, min = 0.0, max = 0.0;
    std::size_t seeds = 0;
};

/// Groups sweep rows by (family, budget). Rows with a non-finite mean RMSE
/// are skipped. Points come out sorted by family, then parameter count.
inline std::vector<BudgetPoint> budget_points(const std::vector<ModelScore>& rows) {
    std::map<std::pair<std::string, std::string>, std::vector<const ModelScore*>> groups;
    for (const auto& r : rows)
        if (!r.budget.empty() && std::isfinite(r.scores.rmse.mean)) groups[{r.family, r.budget}].push_back(&r);
    std::vector<BudgetPoint> pts;
    for (const auto& [key, members] : groups) {
        BudgetPoint p{key.first, key.second};
        p.min = std::numeric_limits<double>::infinity();
        p.max = -p.min;
        for (const auto* m : members) {
            p.params += static_cast<double>(m->params);
            p.mean += m->scores.rmse.mean;
            p.min = std::min(p.min, m->scores.rmse.mean);
            p.max = std::max(p.max, m->scores.rmse.mean);
        }
        p.seeds = members.size();
        p.params /= static_cast<double>(p.seeds);
        p.mean /= static_cast<double>(p.seeds);
        pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end(), [](const BudgetPoint& a, const BudgetPoint& b) {
        return a.family != b.family ? a.family < b.family : a.params < b.params;
    });
    return pts;
}

/// An expected ordering "better has lower mean RMSE than worse" at a budget.
struct RankingCheck {
    std::string budget, better, worse;
    double better_mean = 0.0, worse_mean = 0.0;
    bool inverted = false;
};

/// Evaluates every expected (better, worse) family pair at each budget where
/// both families have results.
inline std::vector<RankingCheck> check_rankings(const std::vector<BudgetPoint>& pts,
                                                const std::vector<std::pair<std::string, std::string>>& expected) {
    std::vector<RankingCheck> out;
    std::map<std::pair<std::string, std::string>, double> mean;
    std::vector<std::string> budgets;
    for (const auto& p : pts) {
        mean[{p.family, p.budget}] = p.mean;
        if (std::find(budgets.begin(), budgets.end(), p.budget) == budgets.end()) budgets.push_back(p.budget);
    }
    for (const auto& b : budgets)
        for (const auto& [better, worse] : expected) {
            auto i = mean.find({better, b}), j = mean.find({worse, b});
            if (i == mean.end() || j == mean.end()) continue;
            out.push_back({b, better, worse, i->second, j->second, !(i->second < j->second)});
        }
    return out;
}

inline void write_ranking_csv(const std::vector<RankingCheck>& checks, const std::string& path) {
    auto out = detail::open_out(path);
    out << "budget,better,worse,better_mean_rmse,worse_mean_rmse,inverted\n";
    for (const auto& c : checks)
        out << c.budget << ',' << c.better << ',' << c.worse << ',' << format_double(c.better_mean) << ','
            << format_double(c.worse_mean) << ',' << (c.inverted ? "yes" : "no") << '\n';
}

/// Minimal SVG line chart with an optional shaded band per series.
class SvgChart {
public:
    struct Series {
        std::string name;
        std::vector<double> x, y, lo, hi;  // lo/hi empty when there is no band
    };

    SvgChart(std::string title, std::string xlabel, std::string ylabel, bool log_x = false)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), log_x_(log_x) {}

    void add(Series s) { series_.push_back(std::move(s)); }

    std::string render() const {
        constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = 0.0, y1 = -x0;
        for (const auto& s : series_) {
            for (double x : s.x) {
                x0 = std::min(x0, tx(x));
                x1 = std::max(x1, tx(x));
            }
            for (double y : s.y)
                if (std::isfinite(y)) y1 = std::max(y1, y);
            for (double y : s.hi)
                if (std::isfinite(y)) y1 = std::max(y1, y);
        }
        if (!std::isfinite(x0)) x0 = 0, x1 = 1;
        if (x1 <= x0) x1 = x0 + 1;
        if (!(y1 > y0)) y1 = y0 + 1;
        y1 *= 1.05;
        auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
        auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

        std::ostringstream o;
        o.precision(6);
        o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
        o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title_ << "</text>\n";
        o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
          << "\" stroke=\"black\"/>\n";
        o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double y = y0 + (y1 - y0) * k / 4.0;
            o << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
              << format_tick(y) << "</text>\n";
            const double xv = x0 + (x1 - x0) * k / 4.0;
            const double label = log_x_ ? std::pow(10.0, xv) : xv;
            o << "<text x=\"" << L + (xv - x0) / (x1 - x0) * (W - L - R) << "\" y=\"" << H - B + 16
              << "\" text-anchor=\"middle\" font-size=\"11\">" << format_tick(label) << "</text>\n";
        }
        o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
          << xlabel_ << "</text>\n";
        o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
          << (T + H - B) / 2 << ")\">" << ylabel_ << "</text>\n";
        for (std::size_t i = 0; i < series_.size(); ++i) {
            const auto& s = series_[i];
            const char* c = colors[i % 6];
            if (!s.lo.empty() && s.lo.size() == s.x.size() && s.hi.size() == s.x.size()) {
                o << "<polygon fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
                for (std::size_t k = 0; k < s.x.size(); ++k) o << px(s.x[k]) << ',' << py(s.hi[k]) << ' ';
                for (std::size_t k = s.x.size(); k-- > 0;) o << px(s.x[k]) << ',' << py(s.lo[k]) << ' ';
                o << "\"/>\n";
            }
            o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k)
                if (std::isfinite(s.y[k])) o << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
            o << "\"/>\n";
            for (std::size_t k = 0; k < s.x.size(); ++k)
                if (std::isfinite(s.y[k]))
                    o << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
            o << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (i + 1) << "\" font-size=\"12\" fill=\"" << c
              << "\">" << s.name << "</text>\n";
        }
        o << "</svg>\n";
        return o.str();
    }

    void write(const std::string& path) const { detail::open_out(path) << render(); }

private:
    double tx(double x) const { return log_x_ ? std::log10(std::max(x, 1e-300)) : x; }

    static std::string format_tick(double v) {
        std::ostringstream o;
        o.precision(3);
        o << v;
        return o.str();
    }

    std::string title_, xlabel_, ylabel_;
    bool log_x_;
    std::vector<Series> series_;
};

/// Mean RMSE against parameter count per family, with the min/max over seeds shaded.
inline SvgChart rmse_vs_params_chart(const std::vector<BudgetPoint>& pts) {
    SvgChart chart("RMSE vs. number of parameters", "parameters", "mean RMSE", true);
    std::map<std::string, SvgChart::Series> by_family;
    for (const auto& p : pts) {
        auto& s = by_family[p.family];
        s.name = p.family;
        s.x.push_back(p.params);
        s.y.push_back(p.mean);
        s.lo.push_back(p.min);
        s.hi.push_back(p.max);
    }
    for (auto& [f, s] : by_family) chart.add(std::move(s));
    return chart;
}

/// RMSE against lead time, one line per report row.
inline SvgChart rmse_vs_lead_chart(const std::vector<ModelScore>& rows) {
    SvgChart chart("RMSE vs. lead time", "lead time", "RMSE");
    for (const auto& r : rows) {
        SvgChart::Series s;
        s.name = r.model;
        for (std::size_t k = 0; k < r.scores.rmse.per_lead.size(); ++k) {
            s.x.push_back(static_cast<double>(k + 1));
            s.y.push_back(r.scores.rmse.per_lead[k]);
        }
        chart.add(std::move(s));
    }
    return chart;
}

}  // namespace stormbench
