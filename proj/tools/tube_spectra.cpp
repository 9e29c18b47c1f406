// tube_spectra: batch front-end for the truncation/exhaustion studies.
//
// Subcommands: eig, exhaust, decay, weyl, torsion, blowup, perturb,
// inradius, plot.  A JSON config file (flat per-study sections) supplies
// defaults; command-line flags override it.  Outputs are deterministic for
// a fixed (config, seed, TUBE_SPECTRA_THREADS).

#include "CLI11.hpp"
#include "json.hpp"

#include "tubes/decay.hpp"
#include "tubes/perturb.hpp"
#include "tubes/spectra.hpp"
#include "tubes/torsion.hpp"
#include "tubes/weyl.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace tubes;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: malformed JSON in " + path);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    return j;
}

/// Pull `key` from the study section unless the flag was given explicitly.
template <typename T>
void merge(const json& cfg, const std::string& section, const std::string& key,
           CLI::Option* opt, T& value) {
    if (opt->count() > 0) return;
    if (!cfg.contains(section)) return;
    const json& sec = cfg.at(section);
    if (!sec.is_object()) throw ConfigError("config: " + section + " must be an object");
    if (!sec.contains(key)) return;
    try {
        value = sec.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for " + section + "." + key);
    }
}

DomainSpec make_domain(const std::string& name) {
    if (name == "hersch") return build_hersch_pipe(64);
    if (name == "cross") return build_infinite_cross();
    if (name == "broken_strip") return build_broken_strip(3.14159265358979323846 / 6.0);
    if (name == "square") return build_unit_square();
    if (name == "slit_disk") return build_slit_disk(64);
    if (name == "diamond") return build_diamond_square();
    throw ConfigError("config: unknown domain " + name);
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/" + name, std::ios::binary);
    out << body;
    std::cout << dir << "/" << name << "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------- plotting ----------------

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;  // NaN for non-numeric cells
};

Csv parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("plot: cannot open " + path);
    Csv csv;
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw ConfigError("plot: empty CSV " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) csv.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                double v = std::stod(cell, &used);
                row.push_back(used == cell.size() ? v : std::nan(""));
            } catch (...) {
                row.push_back(std::nan(""));
            }
        }
        row.resize(csv.header.size(), std::nan(""));
        csv.rows.push_back(row);
    }
    if (csv.rows.empty()) throw ConfigError("plot: no data rows in " + path);
    return csv;
}

size_t column_of(const Csv& csv, const std::string& name) {
    for (size_t i = 0; i < csv.header.size(); ++i)
        if (csv.header[i] == name) return i;
    throw ConfigError("plot: no column named " + name);
}

std::string render_svg(const Csv& csv, size_t cx, size_t cy, bool logy, bool scatter) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : csv.rows) {
        double x = row[cx], y = row[cy];
        if (std::isnan(x) || std::isnan(y)) continue;
        if (logy) {
            if (y <= 0.0) continue;
            y = std::log10(y);
        }
        pts.push_back({x, y});
    }
    if (pts.empty()) throw ConfigError("plot: no plottable points");
    double xmin = pts[0].first, xmax = xmin, ymin = pts[0].second, ymax = ymin;
    for (auto& [x, y] : pts) {
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double W = 640, H = 480, m = 60;
    auto X = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (W - 2 * m); };
    auto Y = [&](double y) { return H - m - (y - ymin) / (ymax - ymin) * (H - 2 * m); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
       << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\""
       << H - m << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - m / 3 << "\" text-anchor=\"middle\">"
       << csv.header[cx] << "</text>\n";
    os << "<text x=\"" << m / 3 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 " << m / 3 << " " << H / 2 << ")\">"
       << (logy ? "log10 " : "") << csv.header[cy] << "</text>\n";
    os << "<text x=\"" << m << "\" y=\"" << H - m + 16 << "\" font-size=\"10\">"
       << fmt(xmin) << "</text>\n";
    os << "<text x=\"" << W - m << "\" y=\"" << H - m + 16 << "\" font-size=\"10\" "
       << "text-anchor=\"end\">" << fmt(xmax) << "</text>\n";
    os << "<text x=\"" << m - 4 << "\" y=\"" << H - m << "\" font-size=\"10\" "
       << "text-anchor=\"end\">" << fmt(ymin) << "</text>\n";
    os << "<text x=\"" << m - 4 << "\" y=\"" << m << "\" font-size=\"10\" "
       << "text-anchor=\"end\">" << fmt(ymax) << "</text>\n";
    if (scatter) {
        for (auto& [x, y] : pts)
            os << "<circle cx=\"" << fmt(X(x)) << "\" cy=\"" << fmt(Y(y))
               << "\" r=\"3\" fill=\"steelblue\"/>\n";
    } else {
        os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        for (auto& [x, y] : pts) os << fmt(X(x)) << ',' << fmt(Y(y)) << ' ';
        os << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<double> parse_schedule(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (...) {
            throw ConfigError("config: bad number in " + what + ": " + cell);
        }
    }
    if (out.empty()) throw ConfigError("config: empty schedule for " + what);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dirichlet-Laplacian spectra on core-plus-tube domains"};
    app.require_subcommand(1);
    // --h is a mesh-size option below, so help must not claim the short -h
    app.set_help_flag("--help", "print help and exit");

    std::string config_path, out_dir = "out", domain = "hersch";
    app.add_option("--config", config_path, "JSON config file");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    int seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "rng seed (recorded for provenance)");

    double R = 8.0, h = 1.0 / 16, tol = 1e-8, lambda = 0.0, grid = 1.0 / 64;
    int k = 1, n = 1;
    std::string R_sched = "4,6,8,10", eps_sched = "0.05,0.025,0.0125", n_list = "1,2,4,8";
    std::string lam_list;

    auto add_common = [&](CLI::App* sub) {
        struct Opts {
            CLI::Option *dom, *R, *h, *k, *tol;
        } o;
        sub->set_help_flag("--help", "print help and exit");
        sub->fallthrough();
        o.dom = sub->add_option("--domain", domain, "domain name");
        o.R = sub->add_option("--R", R, "truncation radius");
        o.h = sub->add_option("--h", h, "target mesh size");
        o.k = sub->add_option("--k", k, "number of eigenvalues");
        o.tol = sub->add_option("--tol", tol, "solver tolerance");
        return o;
    };

    auto* c_eig = app.add_subcommand("eig", "eigenvalues of one truncation");
    auto eig_o = add_common(c_eig);
    auto* c_ex = app.add_subcommand("exhaust", "exhaustion study over R");
    auto ex_o = add_common(c_ex);
    auto* ex_R = c_ex->add_option("--R-schedule", R_sched, "comma-separated R values");
    auto* c_dec = app.add_subcommand("decay", "tail decay bounds for the ground state");
    auto dec_o = add_common(c_dec);
    auto* dec_R = c_dec->add_option("--R-schedule", R_sched, "comma-separated R values");
    auto* c_weyl = app.add_subcommand("weyl", "essential-threshold Weyl report");
    auto weyl_o = add_common(c_weyl);
    auto* weyl_lam = c_weyl->add_option("--lambda", lam_list, "comma-separated levels");
    auto* weyl_n = c_weyl->add_option("--n-list", n_list, "comma-separated n values");
    auto* c_tor = app.add_subcommand("torsion", "thin-tube rigidity eps scaling");
    auto tor_o = add_common(c_tor);
    auto* tor_eps = c_tor->add_option("--eps", eps_sched, "decreasing eps schedule");
    auto* c_blow = app.add_subcommand("blowup", "blow-up constant alpha");
    auto blow_o = add_common(c_blow);
    auto* blow_R = c_blow->add_option("--R-schedule", R_sched, "increasing R_inf schedule");
    auto* c_per = app.add_subcommand("perturb", "Makai-Hayman perturbation verdict");
    auto per_o = add_common(c_per);
    auto* per_eps = c_per->add_option("--eps", eps_sched, "decreasing eps schedule");
    auto* per_n = c_per->add_option("--n", n, "tube count for the direct study");
    double alpha_in = 0.6313;
    auto* per_alpha = c_per->add_option("--alpha", alpha_in, "blow-up constant");
    auto* c_inr = app.add_subcommand("inradius", "inradius of a domain");
    auto inr_o = add_common(c_inr);
    auto* inr_grid = c_inr->add_option("--grid", grid, "search grid spacing");
    auto* c_plot = app.add_subcommand("plot", "render a CSV column pair as SVG");
    std::string plot_csv, plot_x, plot_y, plot_kind = "line";
    bool plot_logy = false;
    c_plot->set_help_flag("--help", "print help and exit");
    c_plot->fallthrough();
    c_plot->add_option("--csv", plot_csv, "input CSV path")->required();
    c_plot->add_option("--x", plot_x, "x column name");
    c_plot->add_option("--y", plot_y, "y column name");
    c_plot->add_option("--kind", plot_kind, "line or scatter");
    c_plot->add_flag("--logy", plot_logy, "log10 y axis");

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_config(config_path);
        merge(cfg, "common", "out", out_opt, out_dir);
        merge(cfg, "common", "seed", seed_opt, seed);

        if (c_eig->parsed()) {
            merge(cfg, "eig", "domain", eig_o.dom, domain);
            merge(cfg, "eig", "R", eig_o.R, R);
            merge(cfg, "eig", "h", eig_o.h, h);
            merge(cfg, "eig", "k", eig_o.k, k);
            merge(cfg, "eig", "tol", eig_o.tol, tol);
            DomainSpec spec = make_domain(domain);
            EigenSolve s = solve_eigs(spec, R, h, k, tol);
            std::ostringstream os;
            os << "R,h,j,lambda\n";
            for (int j = 0; j < k; ++j)
                os << fmt(R) << ',' << fmt(h) << ',' << j << ','
                   << fmt(s.eig.eigenvalues[j]) << '\n';
            write_file(out_dir, "eig.csv", os.str());
        } else if (c_ex->parsed()) {
            merge(cfg, "exhaust", "domain", ex_o.dom, domain);
            merge(cfg, "exhaust", "h", ex_o.h, h);
            merge(cfg, "exhaust", "k", ex_o.k, k);
            merge(cfg, "exhaust", "R_schedule", ex_R, R_sched);
            DomainSpec spec = make_domain(domain);
            ExhaustionStudy st =
                exhaustion_study(spec, parse_schedule(R_sched, "R_schedule"), h, k);
            write_file(out_dir, "exhaust.csv", exhaustion_csv(st));
            write_file(out_dir, "exhaust.json", exhaustion_json(st));
        } else if (c_dec->parsed()) {
            merge(cfg, "decay", "domain", dec_o.dom, domain);
            merge(cfg, "decay", "h", dec_o.h, h);
            merge(cfg, "decay", "R_schedule", dec_R, R_sched);
            DomainSpec spec = make_domain(domain);
            ExhaustionStudy st =
                exhaustion_study(spec, parse_schedule(R_sched, "R_schedule"), h, 1);
            DecayProfile prof = compute_tail_profile(*st.final_solve, 0, spec);
            DecayBoundConstants cst =
                paper_decay_constants(st.threshold, st.lambdas.back()[0], prof.r0);
            DecayCheck chk = verify_decay_bounds(prof, cst, prof.norm_u);
            write_file(out_dir, "decay.csv", decay_csv(prof, chk));
        } else if (c_weyl->parsed()) {
            merge(cfg, "weyl", "domain", weyl_o.dom, domain);
            merge(cfg, "weyl", "h", weyl_o.h, h);
            merge(cfg, "weyl", "lambda", weyl_lam, lam_list);
            merge(cfg, "weyl", "n_list", weyl_n, n_list);
            DomainSpec spec = make_domain(domain);
            double E = tube_threshold(spec, 0);
            std::vector<double> lams =
                lam_list.empty() ? std::vector<double>{E, 2.0 * E}
                                 : parse_schedule(lam_list, "lambda");
            std::vector<int> ns;
            for (double v : parse_schedule(n_list, "n_list")) ns.push_back(int(v));
            auto rows = essential_threshold_report(spec, lams, ns, h);
            write_file(out_dir, "weyl.csv", weyl_csv(rows));
        } else if (c_tor->parsed() || c_blow->parsed()) {
            bool both = c_tor->parsed();
            if (both) {
                merge(cfg, "torsion", "domain", tor_o.dom, domain);
                merge(cfg, "torsion", "h", tor_o.h, h);
                merge(cfg, "torsion", "eps", tor_eps, eps_sched);
            } else {
                merge(cfg, "blowup", "h", blow_o.h, h);
                merge(cfg, "blowup", "R_schedule", blow_R, R_sched);
            }
            std::vector<double> Rs =
                both ? std::vector<double>{2.0, 4.0, 8.0}
                     : parse_schedule(R_sched, "R_schedule");
            BlowUpResult blow = blow_up_constant(Rs, {2.0, 4.0}, h);
            EpsScalingStudy scal;
            if (both) {
                auto one = [](Point2) { return 1.0; };
                scal = epsilon_scaling_study(make_domain(domain), {2.5, 1.0}, one,
                                             parse_schedule(eps_sched, "eps"), h);
            }
            write_file(out_dir, both ? "torsion.csv" : "blowup.csv",
                       torsion_csv(blow, scal));
            json j;
            j["alpha"] = blow.alpha;
            write_file(out_dir, both ? "torsion.json" : "blowup.json", j.dump(2));
        } else if (c_per->parsed()) {
            merge(cfg, "perturb", "domain", per_o.dom, domain);
            merge(cfg, "perturb", "R", per_o.R, R);
            merge(cfg, "perturb", "h", per_o.h, h);
            merge(cfg, "perturb", "n", per_n, n);
            merge(cfg, "perturb", "eps", per_eps, eps_sched);
            merge(cfg, "perturb", "alpha", per_alpha, alpha_in);
            DomainSpec spec = make_domain(domain);
            EigenSolve s = solve_eigs(spec, R, h, 1, tol);
            PerturbationReport rep = rho_verdict(
                spec, s, alpha_in, n, parse_schedule(eps_sched, "eps"), R, h);
            write_file(out_dir, "perturb.csv", perturb_csv(rep));
            write_file(out_dir, "perturb.json", perturb_json(rep));
        } else if (c_inr->parsed()) {
            merge(cfg, "inradius", "domain", inr_o.dom, domain);
            merge(cfg, "inradius", "grid", inr_grid, grid);
            DomainSpec spec = make_domain(domain);
            InradiusResult r = inradius(spec, grid);
            std::ostringstream os;
            os << "domain,grid,inradius,inradius2,center_x,center_y\n"
               << domain << ',' << fmt(grid) << ',' << fmt(r.value) << ','
               << fmt(r.value * r.value) << ',' << fmt(r.center.x) << ','
               << fmt(r.center.y) << '\n';
            write_file(out_dir, "inradius.csv", os.str());
        } else if (c_plot->parsed()) {
            if (plot_kind != "line" && plot_kind != "scatter")
                throw ConfigError("plot: kind must be line or scatter");
            Csv csv = parse_csv(plot_csv);
            size_t cx = plot_x.empty() ? 0 : column_of(csv, plot_x);
            size_t cy = plot_y.empty() ? 1 : column_of(csv, plot_y);
            if (cy >= csv.header.size()) throw ConfigError("plot: CSV has fewer than 2 columns");
            write_file(out_dir, "plot.svg",
                       render_svg(csv, cx, cy, plot_logy, plot_kind == "scatter"));
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
