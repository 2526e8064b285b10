#include "mcw/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcw/clt.hpp"
#include "mcw/exact.hpp"
#include "mcw/landscape.hpp"
#include "mcw/model.hpp"
#include "mcw/sampler.hpp"
#include "mcw/variational.hpp"

namespace mcw::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kLog2 = std::numbers::ln2;

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vec(m.row(r).transpose())));
  return a;
}

json to_json(const Box& box) {
  json a = json::array();
  for (const auto& iv : box) {
    a.push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"lo_open", iv.lo_open}, {"hi_open", iv.hi_open}});
  }
  return a;
}

std::vector<long> parse_long_list(const std::string& text) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("invalid integer '" + item + "'");
    }
    if (used != item.size()) throw ValidationError("invalid integer '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty integer list");
  return out;
}

Vec parse_vec(const std::string& text, int K) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("invalid number '" + item + "'");
    }
    if (used != item.size()) throw ValidationError("invalid number '" + item + "'");
    vals.push_back(v);
  }
  if (static_cast<int>(vals.size()) != K) {
    throw ValidationError("expected " + std::to_string(K) + " comma-separated values, got " +
                          std::to_string(vals.size()));
  }
  return Eigen::Map<Vec>(vals.data(), K);
}

struct Context {
  std::string model_path;
  std::string out_dir;
  bool deterministic = false;
  int threads = 0;
  ModelSpec spec;

  int thread_budget() const { return deterministic ? 1 : resolve_threads(threads); }

  fs::path resolve(const std::string& name) const {
    fs::path p(name);
    if (out_dir.empty() || p.is_absolute()) return p;
    return fs::path(out_dir) / p;
  }
};

std::ofstream open_output(const Context& ctx, const std::string& name) {
  const fs::path p = ctx.resolve(name);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw ValidationError("cannot write '" + p.string() + "'");
  return f;
}

json stationary_json(const StationaryPoint& sp) {
  return {{"x", to_json(sp.x)},
          {"f", sp.f_value},
          {"grad_norm", sp.grad_norm},
          {"kind", kind_name(sp.kind)},
          {"hess_eigs", to_json(sp.hess_eigs)},
          {"basin_seed_count", sp.basin_seed_count}};
}

json clt_json(const CltParams& cp) {
  json j = {{"mu", to_json(cp.mu)}, {"nu", to_json(cp.nu)}, {"sigma", to_json(cp.sigma)}, {"theta", cp.theta}};
  j["box"] = cp.conditioned_box ? to_json(*cp.conditioned_box) : json(nullptr);
  return j;
}

// ---- pressure -------------------------------------------------------------

json pressure_json(const Context& ctx) {
  SaddleOptions opts;
  opts.threads = ctx.thread_budget();
  const SaddleResult r = infsup_solve(ctx.spec, opts);
  json j = {{"value", r.value},
            {"value_prior", r.value},
            {"z_star", to_json(r.z_star)},
            {"x_star", to_json(r.x_star)},
            {"grad_norm", r.grad_norm},
            {"converged", r.converged},
            {"multistart_spread", r.multistart_spread},
            {"a", r.a},
            {"method", r.method}};
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"x", to_json(c.x)},
                     {"value", c.value},
                     {"grad_norm", c.grad_norm},
                     {"inertia_ok", c.inertia_ok},
                     {"certified", c.certified}});
  }
  j["candidates"] = cands;
  if (is_ising(ctx.spec.prior)) {
    j["value_counting"] = r.value + kLog2;
    StationarySearch search;
    search.threads = ctx.thread_budget();
    const MaximizerSet ms = global_maximizers(FreeEnergy::limiting(ctx.spec), 1e-9, search);
    j["landscape_max_f"] = ms.f_max;
    j["cross_check_error"] = std::abs(r.value + kLog2 - ms.f_max);
  } else {
    j["value_counting"] = nullptr;
  }
  return j;
}

// ---- landscape ------------------------------------------------------------

json landscape_json(const Context& ctx, int grid_density, const std::string& emit) {
  StationarySearch search;
  search.grid_density = grid_density;
  search.threads = ctx.thread_budget();
  const FreeEnergy fe = FreeEnergy::limiting(ctx.spec);
  const auto pts = find_all_stationary(fe, search);
  const MaximizerSet ms = global_maximizers(fe, 1e-9, search);
  json arr = json::array();
  for (const auto& sp : pts) arr.push_back(stationary_json(sp));
  json maxima = json::array();
  for (const auto& mp : ms.points) maxima.push_back(to_json(mp.x));
  if (!emit.empty()) {
    auto f = open_output(ctx, emit);
    for (int l = 0; l < ctx.spec.K; ++l) f << "x_" << (l + 1) << ",";
    f << "f,kind,min_hess_eig\n";
    for (const auto& sp : pts) {
      for (int l = 0; l < ctx.spec.K; ++l) f << format_double(sp.x(l)) << ",";
      f << format_double(sp.f_value) << "," << kind_name(sp.kind) << "," << format_double(sp.hess_eigs.minCoeff()) << "\n";
    }
  }
  return {{"points", arr},
          {"count", pts.size()},
          {"maxima_count", std::count_if(pts.begin(), pts.end(),
                                         [](const StationaryPoint& s) { return s.kind == PointKind::Maximum; })},
          {"global_maximizers", maxima},
          {"f_max", ms.f_max},
          {"degenerate", ms.degenerate}};
}

// ---- clt ------------------------------------------------------------------

json clt_section(const Context& ctx, const std::vector<std::string>& box_texts) {
  const MaximizerSet ms = global_maximizers(ctx.spec);
  json arr = json::array();
  if (box_texts.empty()) {
    if (ms.points.size() != 1) {
      throw ValidationError("the model has " + std::to_string(ms.points.size()) +
                            " global maximizers; pass one --box per maximizer");
    }
    if (ms.degenerate) throw NumericalError("the global maximizer is degenerate");
    arr.push_back(clt_json(clt_params(ctx.spec, ms.points.front())));
  } else {
    std::vector<Box> boxes;
    for (const auto& b : box_texts) boxes.push_back(parse_box(b, ctx.spec.K));
    for (const auto& cp : conditional_clt_params(ctx.spec, ms, boxes)) arr.push_back(clt_json(cp));
  }
  return arr;
}

// ---- exact ----------------------------------------------------------------

json exact_json(const Context& ctx, long N, const std::string& tilt_text, const std::string& box_text,
                const std::string& emit, double budget) {
  const ModelSpec& spec = ctx.spec;
  const Vec t = tilt_text.empty() ? Vec(Vec::Zero(spec.K)) : parse_vec(tilt_text, spec.K);
  const FiniteSizes sizes = finite_sizes(spec, N);
  ExactOptions eo;
  eo.threads = ctx.thread_budget();
  eo.budget = budget;
  SectorLaw law = sector_law(spec, sizes, t, eo);
  json j;
  j["N"] = N;
  j["sizes"] = sizes.sizes;
  j["alpha_N"] = to_json(sizes.alpha_N);
  j["tilt"] = to_json(t);
  j["log_Z"] = law.log_Z;
  j["pressure_counting"] = law.log_Z / static_cast<double>(N);
  j["pressure_prior"] = law.log_Z / static_cast<double>(N) - kLog2 * static_cast<double>(sizes.total()) / static_cast<double>(N);
  try {
    const LaplaceEstimate est = laplace_log_Z(spec, sizes, t);
    j["laplace"] = {{"log_Z_estimate", est.log_Z_estimate},
                    {"abs_error", std::abs(est.log_Z_estimate - law.log_Z)},
                    {"mu_Nt", to_json(est.mu_Nt)},
                    {"note", est.error_order_note}};
  } catch (const NumericalError& e) {
    j["laplace"] = {{"skipped", e.what()}};
  }
  if (!box_text.empty()) {
    const Box box = parse_box(box_text, spec.K);
    j["box"] = to_json(box);
    j["box_mass"] = box_mass(law, box);
    law = conditional_law(law, box);
    j["log_Z_box"] = law.log_Z;
  }
  const LawMoments mom = moments(law, Vec::Zero(spec.K), eo.threads);
  j["mean"] = to_json(mom.mean);
  j["cov"] = to_json(mom.cov);
  if (!emit.empty()) {
    auto f = open_output(ctx, emit);
    for (int l = 0; l < spec.K; ++l) f << "x_" << (l + 1) << ",";
    f << "probability\n";
    for (std::size_t i = 0; i < law.grid.total_cells; ++i) {
      if (law.log_weights[i] == kNegInf) continue;
      const Vec x = law.grid.point(i);
      for (int l = 0; l < spec.K; ++l) f << format_double(x(l)) << ",";
      f << format_double(law.probability(i)) << "\n";
    }
  }
  return j;
}

// ---- sample ---------------------------------------------------------------

InitKind parse_init(const std::string& s) {
  if (s == "up") return InitKind::AllUp;
  if (s == "down") return InitKind::AllDown;
  if (s == "random") return InitKind::Random;
  if (s == "mixed") return InitKind::Random;
  throw ValidationError("unknown --init '" + s + "' (up, down, random, mixed)");
}

json sample_json(const Context& ctx, long N, int chains, long sweeps, long burn_in, long thinning,
                 std::uint64_t seed, const std::string& init, const std::string& emit) {
  const ModelSpec& spec = ctx.spec;
  const FiniteSizes sizes = finite_sizes(spec, N);
  ChainConfig cc;
  cc.seed = seed;
  cc.sample_sweeps = sweeps;
  cc.burn_in_sweeps = burn_in;
  cc.thinning = thinning;
  cc.init = parse_init(init);
  std::vector<InitKind> inits;
  if (init == "mixed") {
    for (int c = 0; c < chains; ++c) inits.push_back(c % 2 == 0 ? InitKind::AllUp : InitKind::AllDown);
  }
  const MultiChainResult mc = multichain(spec, sizes, cc, chains, ctx.thread_budget(), inits);
  const Mat& y = mc.pooled;
  const Vec mean = y.colwise().mean().transpose();
  const Mat centered = y.rowwise() - mean.transpose();
  const Mat cov = y.rows() > 1 ? Mat(centered.transpose() * centered / static_cast<double>(y.rows() - 1))
                               : Mat(Mat::Zero(spec.K, spec.K));
  if (!emit.empty()) {
    auto f = open_output(ctx, emit);
    for (int l = 0; l < spec.K; ++l) f << (l ? "," : "") << "m_" << (l + 1);
    f << "\n";
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (int l = 0; l < spec.K; ++l) f << (l ? "," : "") << format_double(y(r, l));
      f << "\n";
    }
  }
  json acc = json::array();
  for (const auto& c : mc.chains) acc.push_back(c.acceptance);
  return {{"N", N},
          {"sizes", sizes.sizes},
          {"chains", chains},
          {"samples", y.rows()},
          {"mean", to_json(mean)},
          {"cov", to_json(cov)},
          {"acceptance", acc},
          {"rhat", mc.rhat ? to_json(*mc.rhat) : json(nullptr)}};
}

// ---- verify ---------------------------------------------------------------

struct VerifyArgs {
  std::string N_list = "200,400,800";
  std::string source = "exact";
  std::string box;
  double mean_tol = 0.05;
  double cov_tol = 0.10;
  double mgf_tol = 0.10;
  int chains = 4;
  long sweeps = 20000;
  std::uint64_t seed = 1;
};

VerifyReport run_verify(const Context& ctx, const VerifyArgs& va) {
  VerifyOptions vo;
  vo.mean_tol = va.mean_tol;
  vo.cov_tol = va.cov_tol;
  vo.mgf_tol = va.mgf_tol;
  vo.threads = ctx.thread_budget();
  vo.chains = va.chains;
  vo.chain.sample_sweeps = va.sweeps;
  vo.chain.burn_in_sweeps = std::max(1L, va.sweeps / 10);
  vo.chain.seed = va.seed;
  CltSource src;
  if (va.source == "exact") {
    src = CltSource::Exact;
  } else if (va.source == "sampler") {
    src = CltSource::Sampler;
  } else {
    throw ValidationError("--source must be exact or sampler");
  }
  std::optional<Box> box;
  if (!va.box.empty()) box = parse_box(va.box, ctx.spec.K);
  return verify_clt(ctx.spec, parse_long_list(va.N_list), src, box, vo);
}

std::string verify_csv(const VerifyReport& rep, int K) {
  std::ostringstream os;
  os << "N";
  for (int l = 0; l < K; ++l) os << ",mean_err_" << (l + 1);
  os << ",cov_rel_err,mgf_err,status\n";
  for (const auto& row : rep.rows) {
    os << row.N;
    for (int l = 0; l < K; ++l) os << "," << format_double(row.mean_err(l));
    os << "," << format_double(row.cov_rel_err) << "," << format_double(row.mgf_err) << ","
       << (row.pass ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

json verify_json(const VerifyReport& rep) {
  json rows = json::array();
  for (const auto& row : rep.rows) {
    rows.push_back({{"N", row.N},
                    {"scaled_mean", to_json(row.scaled_mean)},
                    {"scaled_cov", to_json(row.scaled_cov)},
                    {"mean_err", to_json(row.mean_err)},
                    {"cov_rel_err", row.cov_rel_err},
                    {"mgf_err", row.mgf_err},
                    {"status", row.pass ? "PASS" : "FAIL"}});
  }
  return {{"prediction", clt_json(rep.prediction)},
          {"rows", rows},
          {"mean_err_decreasing", rep.mean_err_decreasing},
          {"cov_err_decreasing", rep.cov_err_decreasing},
          {"mgf_err_decreasing", rep.mgf_err_decreasing}};
}

// ---- report ---------------------------------------------------------------

template <class F>
json guarded(F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    return {{"skipped", std::string(e.what())}};
  } catch (const NumericalError& e) {
    return {{"skipped", std::string(e.what())}};
  }
}

json report_json(const Context& ctx, const std::string& N_list, const std::vector<std::string>& boxes) {
  json j;
  j["format"] = "mcw-report";
  j["version"] = 1;
  j["model"] = json::parse(spec_to_json(ctx.spec));
  j["pressure"] = guarded([&] { return pressure_json(ctx); });
  j["landscape"] = guarded([&] { return landscape_json(ctx, 7, ""); });
  j["clt"] = guarded([&] { return json{{"params", clt_section(ctx, boxes)}}; });
  const std::vector<long> Ns = parse_long_list(N_list);
  j["exact"] = guarded([&] {
    json rows = json::array();
    for (long N : Ns) rows.push_back(exact_json(ctx, N, "", "", "", 2e7));
    return json{{"rows", rows}};
  });
  j["verify"] = guarded([&] {
    json per_box = json::array();
    VerifyArgs va;
    va.N_list = N_list;
    if (boxes.empty()) {
      per_box.push_back(verify_json(run_verify(ctx, va)));
    } else {
      for (const auto& b : boxes) {
        va.box = b;
        per_box.push_back(verify_json(run_verify(ctx, va)));
      }
    }
    return json{{"reports", per_box}};
  });
  return j;
}

void write_json(const Context& ctx, std::ostream& out, const json& j, const std::string& file) {
  const std::string text = j.dump(2);
  out << text << "\n";
  if (!ctx.out_dir.empty()) {
    auto f = open_output(ctx, file);
    f << text << "\n";
  }
}

void print_error(std::ostream& err, const char* kind, const std::string& msg) {
  std::string flat = msg;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "error kind=" << kind << " message=\"" << flat << "\"\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multispecies Curie-Weiss toolkit", "mcw"};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("--model", ctx.model_path, "Model JSON file")->required();
  app.add_option("--out", ctx.out_dir, "Output directory for emitted files");
  app.add_flag("--deterministic", ctx.deterministic, "Single-threaded reductions and fixed seeds");
  app.add_option("--threads", ctx.threads, "Thread budget (default: MCW_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  auto* pressure = app.add_subcommand("pressure", "Limiting pressure from the inf-sup problem");

  auto* landscape = app.add_subcommand("landscape", "Stationary points of the free-energy functional");
  int grid_density = 7;
  std::string land_emit;
  landscape->add_option("--grid-density", grid_density, "Seeds per dimension")->check(CLI::Range(2, 1000));
  landscape->add_option("--emit", land_emit, "CSV of stationary points");

  auto* clt = app.add_subcommand("clt", "Predicted fluctuation parameters");
  std::vector<std::string> clt_boxes;
  clt->add_option("--box", clt_boxes, "Conditioning box lo:hi,... (repeatable)");

  auto* exact = app.add_subcommand("exact", "Exact finite-N sector enumeration");
  long exact_N = 0;
  std::string tilt, exact_box, exact_emit;
  double budget = 2e7;
  exact->add_option("--N", exact_N, "System size")->required()->check(CLI::PositiveNumber);
  exact->add_option("--tilt", tilt, "Tilt t1,...,tK");
  exact->add_option("--box", exact_box, "Conditioning box lo:hi,...");
  exact->add_option("--emit", exact_emit, "CSV of the magnetization law");
  exact->add_option("--budget", budget, "Maximum number of sector cells");

  auto* sample = app.add_subcommand("sample", "Glauber dynamics Monte Carlo");
  long sample_N = 0, sweeps = 10000, burn_in = 1000, thinning = 1;
  int chains = 4;
  std::uint64_t seed = 1;
  std::string init = "random", sample_emit;
  sample->add_option("--N", sample_N, "System size")->required()->check(CLI::PositiveNumber);
  sample->add_option("--chains", chains, "Independent chains")->check(CLI::PositiveNumber);
  sample->add_option("--sweeps", sweeps, "Sampling sweeps per chain")->check(CLI::PositiveNumber);
  sample->add_option("--burn-in", burn_in, "Burn-in sweeps")->check(CLI::PositiveNumber);
  sample->add_option("--thinning", thinning, "Keep every n-th sweep")->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "Base seed");
  sample->add_option("--init", init, "up, down, random, or mixed (alternating up/down)");
  sample->add_option("--emit", sample_emit, "CSV of retained samples");

  auto* verify = app.add_subcommand("verify", "Compare finite-N fluctuations with the limit law");
  VerifyArgs va;
  std::string verify_emit;
  verify->add_option("--N", va.N_list, "Comma-separated sizes");
  verify->add_option("--source", va.source, "exact or sampler");
  verify->add_option("--box", va.box, "Conditioning box lo:hi,...");
  verify->add_option("--mean-tol", va.mean_tol);
  verify->add_option("--cov-tol", va.cov_tol);
  verify->add_option("--mgf-tol", va.mgf_tol);
  verify->add_option("--chains", va.chains)->check(CLI::PositiveNumber);
  verify->add_option("--sweeps", va.sweeps)->check(CLI::PositiveNumber);
  verify->add_option("--seed", va.seed);
  verify->add_option("--emit", verify_emit, "Also write the CSV report to this file");

  auto* report = app.add_subcommand("report", "Full pipeline summary as JSON");
  std::string report_N = "100,200,400";
  std::vector<std::string> report_boxes;
  report->add_option("--N", report_N, "Comma-separated sizes for the exact and verify stages");
  report->add_option("--box", report_boxes, "Conditioning boxes for multi-maximizer models");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    print_error(err, "usage", e.what());
    return kValidation;
  }

  try {
    ctx.spec = load_spec_file(ctx.model_path);
    if (*pressure) {
      write_json(ctx, out, pressure_json(ctx), "pressure.json");
    } else if (*landscape) {
      write_json(ctx, out, landscape_json(ctx, grid_density, land_emit), "landscape.json");
    } else if (*clt) {
      write_json(ctx, out, json{{"params", clt_section(ctx, clt_boxes)}}, "clt.json");
    } else if (*exact) {
      write_json(ctx, out, exact_json(ctx, exact_N, tilt, exact_box, exact_emit, budget), "exact.json");
    } else if (*sample) {
      write_json(ctx, out,
                 sample_json(ctx, sample_N, chains, sweeps, burn_in, thinning, seed, init, sample_emit),
                 "sample.json");
    } else if (*verify) {
      const VerifyReport rep = run_verify(ctx, va);
      const std::string csv = verify_csv(rep, ctx.spec.K);
      out << csv;
      if (!verify_emit.empty()) open_output(ctx, verify_emit) << csv;
    } else if (*report) {
      write_json(ctx, out, report_json(ctx, report_N, report_boxes), "report.json");
    }
  } catch (const ValidationError& e) {
    print_error(err, "validation", e.what());
    return kValidation;
  } catch (const NumericalError& e) {
    print_error(err, "numerical", e.what());
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(err, "validation", e.what());
    return kValidation;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace mcw::cli
