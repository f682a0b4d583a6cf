// winding: evaluate, sample and verify the winding hitting-time laws.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <winding/report.hpp>
#include <winding/suite.hpp>

using namespace winding;
using json = nlohmann::ordered_json;

namespace {

enum Exit { ok = 0, failed = 1, bad_args = 2, no_convergence = 3 };

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// start:stop:count, log:start:stop:count, a comma list, or one value
std::vector<double> parse_grid(const std::string& spec) {
  std::string s = spec;
  bool log_spaced = false;
  if (s.rfind("log:", 0) == 0) {
    log_spaced = true;
    s = s.substr(4);
  }
  std::vector<std::string> parts;
  const char sep = s.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
  auto num = [&](const std::string& p) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != p.size() || !std::isfinite(v)) throw usage_error("bad grid '" + spec + "'");
    return v;
  };
  std::vector<double> g;
  if (sep == ':') {
    if (parts.size() != 3) throw usage_error("grid needs start:stop:count, got '" + spec + "'");
    const double a = num(parts[0]), b = num(parts[1]);
    const double cnt = num(parts[2]);
    if (cnt < 1 || cnt != std::floor(cnt)) throw usage_error("grid count must be a positive integer");
    const int n = static_cast<int>(cnt);
    if (log_spaced && !(a > 0 && b > 0)) throw usage_error("log grid needs positive end points");
    for (int i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      g.push_back(log_spaced ? std::exp(std::log(a) + f * (std::log(b) - std::log(a))) : a + f * (b - a));
    }
    // end points exactly as given
    g.front() = a;
    if (n > 1) g.back() = b;
  } else {
    if (log_spaced) throw usage_error("log: prefix needs start:stop:count");
    for (const auto& p : parts) g.push_back(num(p));
  }
  if (g.empty()) throw usage_error("empty grid");
  return g;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A table written as CSV (header + rows) or JSON ({meta..., rows: [...]})
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  json meta = json::object();

  void write(std::ostream& os, const std::string& format) const {
    if (format == "json") {
      json j = meta;
      j["columns"] = columns;
      json rs = json::array();
      for (const auto& r : rows) {
        json o = json::object();
        for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
        rs.push_back(o);
      }
      j["rows"] = rs;
      os << j.dump(2) << "\n";
      return;
    }
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt(r[i]);
      os << "\n";
    }
  }
};

struct Common {
  std::string format = "csv";
  std::string output;
  unsigned threads = 0;
};

void emit(const Common& co, const std::function<void(std::ostream&)>& body) {
  if (co.output.empty() || co.output == "-") {
    body(std::cout);
    return;
  }
  std::ofstream f(co.output, std::ios::binary);
  if (!f) throw usage_error("cannot open output file " + co.output);
  body(f);
}

ConeSpec cone_from(double c, std::optional<double> d) { return d ? ConeSpec(c, *d) : ConeSpec(c); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Winding hitting-time laws of planar Brownian motion and complex OU processes"};
  app.require_subcommand(1);
  Common co;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--format", co.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--output,-o", co.output, "output file (default stdout)");
    s->add_option("--threads", co.threads, "worker threads (default WINDING_THREADS or all cores)");
  };

  // density
  double c = 0;
  std::optional<double> d;
  std::optional<int> K, N;
  double tail_tol = 1e-12;
  int max_terms = 10000;
  bool adaptive = false;
  std::string tgrid;
  auto* dens = app.add_subcommand("density", "exit-time density of the symmetric cone, with negativity flag");
  dens->add_option("--c", c, "half-angle of the cone")->required();
  dens->add_option("--K", K, "outer truncation index");
  dens->add_option("--N", N, "inner truncation index");
  dens->add_option("--tail-tol", tail_tol, "tail tolerance in adaptive mode");
  dens->add_option("--max-terms", max_terms, "term budget per series in adaptive mode");
  dens->add_flag("--adaptive", adaptive, "adaptive truncation (default unless --K/--N given)");
  dens->add_option("--t", tgrid, "time grid")->required();
  add_common(dens);

  // laplace
  std::string kind = "one-sided", xgrid;
  auto* lap = app.add_subcommand("laplace", "Laplace transforms of the exit times");
  lap->add_option("--kind", kind, "one-sided | q | reconstructed | two-sided | range")
      ->check(CLI::IsMember({"one-sided", "q", "reconstructed", "two-sided", "range"}));
  lap->add_option("--c", c, "cone angle")->required();
  lap->add_option("--x", xgrid, "grid of x >= 0")->required();
  add_common(lap);

  // moments
  bool second = false, fourth = false, logm = false, tailc = false, ou_small = false, ou_large = false;
  double lambda = 0, D = 0.5, z0 = 1;
  auto* mom = app.add_subcommand("moments", "moments and asymptotic constants");
  mom->add_option("--c", c, "cone angle")->required();
  mom->add_option("--d", d, "lower angle (defaults to c)");
  mom->add_flag("--second", second, "E[T] = E[sinh^2]");
  mom->add_flag("--fourth", fourth, "E[sinh^4]");
  mom->add_flag("--log", logm, "E[ln T]");
  mom->add_flag("--tail-constant", tailc, "4c/pi");
  mom->add_flag("--ou-small", ou_small, "small-lambda mean OU exit time");
  mom->add_flag("--ou-large", ou_large, "large-lambda mean OU exit time");
  mom->add_option("--lambda", lambda, "OU mean reversion");
  mom->add_option("--D", D, "OU diffusion coefficient");
  mom->add_option("--z0", z0, "start modulus");
  add_common(mom);

  // sample
  std::string law;
  std::size_t n = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  double b = 1, horizon = 1;
  std::string mode = "exact";
  bool supremum = false;
  int stride = 1;
  auto* smp = app.add_subcommand("sample", "draw samples from a law");
  smp->add_option("--law", law,
                  "exit-cone | exit-cone-one-sided | one-sided-hit | two-sided-hit | exp-functional | range-exit | "
                  "winding-at-hit | clock-at-hit | ou-exit | ou-winding-at-hit | winding-end | path")
      ->required()
      ->check(CLI::IsMember({"exit-cone", "exit-cone-one-sided", "one-sided-hit", "two-sided-hit", "exp-functional",
                             "range-exit", "winding-at-hit", "clock-at-hit", "ou-exit", "ou-winding-at-hit",
                             "winding-end", "path"}));
  smp->add_option("--c", c, "cone angle / level");
  smp->add_option("--z0", z0, "start modulus");
  smp->add_option("--dt", dt, "time step");
  smp->add_option("--n", n, "number of samples");
  smp->add_option("--seed", seed, "master seed")->required();
  smp->add_option("--b", b, "level of the independent linear BM");
  smp->add_option("--lambda", lambda, "OU mean reversion");
  smp->add_option("--D", D, "OU diffusion coefficient");
  smp->add_option("--mode", mode, "exact | simulated (winding-at-hit), time-change | direct (ou-exit)");
  smp->add_flag("--supremum", supremum, "running maximum of the angle (winding-at-hit)");
  smp->add_option("--horizon", horizon, "time horizon (winding-end, path, exp-functional)");
  smp->add_option("--stride", stride, "keep every k-th step (path)");
  add_common(smp);

  // verify
  std::string suite = "all";
  std::size_t samples = 100000;
  auto* ver = app.add_subcommand("verify", "run the acceptance suite and report");
  ver->add_option("--suite", suite, "all, or a comma list of criterion numbers 1-10");
  ver->add_option("--seed", seed, "master seed")->required();
  ver->add_option("--samples", samples, "base sample size (batches scale with it)");
  add_common(ver);
  co.format = "json";

  // spitzer
  std::size_t sp_n = 10000;
  auto* spz = app.add_subcommand("spitzer", "KS distance of 2 theta_t / ln t to Cauchy(1) over a time grid");
  spz->add_option("--t", tgrid, "time grid, t > 1")->required();
  spz->add_option("--n", sp_n, "paths per time");
  spz->add_option("--seed", seed, "master seed")->required();
  add_common(spz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : bad_args;
  }
  // csv is the default everywhere except verify
  if (!ver->parsed() && ver->count("--format") == 0 && app.get_subcommands().front()->count("--format") == 0)
    co.format = "csv";

  try {
    if (dens->parsed()) {
      const ConeSpec cone(c);
      SeriesTruncation tr = SeriesTruncation::adaptive_tol(tail_tol);
      if (max_terms < 1) throw usage_error("--max-terms must be positive");
      tr.max_terms = max_terms;
      if ((K || N) && !adaptive) {
        if (!K || !N) throw usage_error("--K and --N go together");
        tr = SeriesTruncation::fixed(*K, *N);
      }
      detail::check_truncation(tr);
      Table t;
      t.columns = {"t", "density", "negative"};
      t.meta["c"] = c;
      t.meta["truncation"] = tr.adaptive ? json{{"adaptive", true}, {"tail_tol", tr.tail_tol}}
                                         : json{{"adaptive", false}, {"K", tr.K}, {"N", tr.N}};
      int flagged = 0;
      for (double x : parse_grid(tgrid)) {
        const DensityValue v = exit_cone_density_detail(x, cone, tr);
        t.rows.push_back({x, v.value, v.negative ? 1.0 : 0.0});
        flagged += v.negative;
      }
      if (flagged) std::cerr << "warning: " << flagged << " grid points have a negative truncated density\n";
      emit(co, [&](std::ostream& os) { t.write(os, co.format); });
    } else if (lap->parsed()) {
      const ConeSpec cone(c);
      Table t;
      t.columns = {"x", kind};
      t.meta["c"] = c;
      for (double x : parse_grid(xgrid)) {
        double v = 0;
        if (kind == "one-sided") v = laplace_one_sided(x, c);
        else if (kind == "q") v = q_laplace(x, c);
        else if (kind == "reconstructed") v = p_laplace_from_phi(x, c);
        else if (kind == "two-sided") v = laplace_two_sided(x, cone);
        else v = laplace_range(x, cone);
        t.rows.push_back({x, v});
      }
      emit(co, [&](std::ostream& os) { t.write(os, co.format); });
    } else if (mom->parsed()) {
      const ConeSpec cone = cone_from(c, d);
      if (!(second || fourth || logm || tailc || ou_small || ou_large))
        throw usage_error("moments: pick at least one of --second --fourth --log --tail-constant --ou-small --ou-large");
      Table t;
      t.columns = {"c", "value"};
      std::vector<std::pair<std::string, double>> out;
      if (second) out.emplace_back("second", sinh_moment2(c));
      if (fourth) out.emplace_back("fourth", sinh_moment4(c));
      if (logm) out.emplace_back("log", expected_log_exit(cone));
      if (tailc) out.emplace_back("tail_constant", tail_constant(c));
      if (ou_small) out.emplace_back("ou_small", ou_mean_exit_asymptotics(cone, OuSpec(lambda, D, z0), OuRegime::small_lambda));
      if (ou_large) out.emplace_back("ou_large", ou_mean_exit_asymptotics(cone, OuSpec(lambda, D, z0), OuRegime::large_lambda));
      if (co.format == "json") {
        json j = {{"c", c}};
        for (auto& [k, v] : out) j[k] = v;
        emit(co, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
      } else {
        emit(co, [&](std::ostream& os) {
          os << "quantity,c,value\n";
          for (auto& [k, v] : out) os << k << "," << fmt(c) << "," << fmt(v) << "\n";
        });
      }
    } else if (smp->parsed()) {
      if (n == 0) throw usage_error("--n must be positive");
      const double cc = c > 0 ? c : pi / 4;
      const double step = dt ? *dt : default_cone_dt(cc);
      if (!(step > 0)) throw usage_error("--dt must be positive");
      const OuSpec ou(lambda, D, z0);
      if (law == "path") {
        RngStream rng(*seed, 0);
        WindingOptions o;
        o.record_stride = stride;
        o.lambda = lambda;
        o.D = D;
        const WindingPath p = simulate_planar_winding(horizon, z0, dt ? *dt : inf, rng, o);
        Table t;
        t.columns = {"t", "log_modulus", "angle", "clock"};
        t.meta["seed"] = *seed;
        t.meta["stream"] = 0;
        for (std::size_t i = 0; i < p.times.size(); ++i)
          t.rows.push_back({p.times[i], p.log_modulus[i], p.angle[i], p.clock[i]});
        emit(co, [&](std::ostream& os) { t.write(os, co.format); });
        return ok;
      }
      if ((law == "exit-cone" || law == "exit-cone-one-sided" || law == "one-sided-hit" || law == "two-sided-hit" ||
           law == "range-exit" || law == "ou-exit") && !(c > 0))
        throw usage_error("--c is required and must be positive for law " + law);
      if (law == "winding-at-hit" && mode != "exact" && mode != "simulated") throw usage_error("--mode exact|simulated");
      if (law == "ou-exit" && mode == "exact") mode = "time-change";
      if (law == "ou-exit" && mode != "time-change" && mode != "direct") throw usage_error("--mode time-change|direct");
      std::function<double(RngStream&)> fn;
      if (law == "exit-cone") fn = [&](RngStream& r) { return sample_exit_cone(ConeSpec(c), z0, step, r); };
      else if (law == "exit-cone-one-sided") fn = [&](RngStream& r) { return sample_exit_cone_one_sided(c, z0, step, r).value; };
      else if (law == "one-sided-hit") fn = [&](RngStream& r) { return sample_one_sided_hit(c, r); };
      else if (law == "two-sided-hit") fn = [&](RngStream& r) { return sample_two_sided_hit(c, step, r); };
      else if (law == "exp-functional") fn = [&](RngStream& r) { return exp_functional(horizon, dt ? *dt : 1e-3, r).A; };
      else if (law == "range-exit") fn = [&](RngStream& r) { return sample_range_exit(c, step, r); };
      else if (law == "winding-at-hit")
        fn = [&](RngStream& r) {
          return sample_winding_at_indep_hit(b, mode == "exact" ? HitMode::exact : HitMode::simulated, r, supremum);
        };
      else if (law == "clock-at-hit") fn = [&](RngStream& r) { return sample_clock_at_indep_hit(b, r); };
      else if (law == "ou-exit")
        fn = [&](RngStream& r) {
          return sample_ou_exit(ConeSpec(c), ou, step, r, mode == "direct" ? OuMode::direct : OuMode::time_change);
        };
      else if (law == "ou-winding-at-hit") fn = [&](RngStream& r) { return sample_ou_winding_at_hit(b, ou, dt ? *dt : 0.01, r); };
      else fn = [&](RngStream& r) { return simulate_winding_end(horizon, z0, {}, r).theta; };
      const SampleBatch batch = generate_batch(n, *seed, 0, law, fn, co.threads);
      Table t;
      t.columns = {"seed", "stream", "value"};
      t.meta["law"] = law;
      t.meta["seed"] = *seed;
      t.meta["first_stream"] = 0;
      t.meta["n"] = batch.n();
      for (std::size_t i = 0; i < batch.n(); ++i) t.rows.push_back({static_cast<double>(*seed), static_cast<double>(i), batch.values[i]});
      emit(co, [&](std::ostream& os) { t.write(os, co.format); });
    } else if (ver->parsed()) {
      SuiteConfig cfg;
      cfg.seed = *seed;
      cfg.samples = samples;
      cfg.threads = co.threads;
      if (suite != "all")
        for (double v : parse_grid(suite)) {
          if (v < 1 || v > 10 || v != std::floor(v)) throw usage_error("--suite takes criterion numbers 1-10");
          cfg.only.insert(static_cast<int>(v));
        }
      if (samples == 0) throw usage_error("--samples must be positive");
      const std::vector<CriterionResult> res = run_suite(cfg, [](const CriterionResult& r) {
        std::cerr << (r.pass ? "PASS " : "FAIL ") << r.id << " " << r.name << "\n";
      });
      bool all = true;
      for (const auto& r : res) all = all && r.pass;
      if (co.format == "json") {
        const json j = suite_report(cfg, suite, res);
        emit(co, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
      } else {
        emit(co, [&](std::ostream& os) {
          os << "criterion,name,pass,key,value\n";
          for (const auto& r : res)
            for (const auto& [k, x] : r.values)
              os << r.id << ",\"" << r.name << "\"," << (r.pass ? 1 : 0) << "," << k << "," << fmt(x) << "\n";
        });
      }
      return all ? ok : failed;
    } else if (spz->parsed()) {
      const std::vector<double> ts = parse_grid(tgrid);
      Table t;
      t.columns = {"t", "n", "statistic"};
      t.meta["seed"] = *seed;
      SpitzerOptions o;
      o.threads = co.threads;
      for (double x : ts) {
        const SampleBatch sb = spitzer_batch(x, sp_n, *seed, o);
        t.rows.push_back({x, static_cast<double>(sp_n), ks_statistic(sb.values, [](double y) { return cauchy_cdf(y, 1); })});
      }
      emit(co, [&](std::ostream& os) { t.write(os, co.format); });
    }
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bad_args;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bad_args;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bad_args;
  } catch (const convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return no_convergence;
  } catch (const step_underflow_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return no_convergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failed;
  }
  return ok;
}
