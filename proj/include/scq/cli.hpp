#pragma once

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scq/eval.hpp"
#include "scq/io.hpp"
#include "scq/pipeline.hpp"

namespace scq {

/// 1: the invocation is wrong. 2: the data is wrong. 3: the numerics failed.
inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
      return 1;
    case ErrorCode::InvalidData:
    case ErrorCode::InvalidInput:
    case ErrorCode::FormatError:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::CorruptModel:
    case ErrorCode::DegenerateData:
      return 2;
    case ErrorCode::NumericalFailure:
    case ErrorCode::SingularRegularization:
    case ErrorCode::OutOfBracket:
    case ErrorCode::DegenerateColumn:
    case ErrorCode::ConvergenceFailure:
    case ErrorCode::DegenerateSpectrum:
      return 3;
  }
  return 3;
}

namespace detail {

inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Flag wins, then the SCQ_SEED environment variable, then 1.
inline std::uint32_t resolve_seed(bool flag_given, long long flag_value) {
  constexpr long long cap = 0xffffffffLL;
  if (flag_given) {
    if (flag_value < 0 || flag_value > cap)
      fail(ErrorCode::InvalidConfig, "seed must be in [0, 4294967295]");
    return static_cast<std::uint32_t>(flag_value);
  }
  if (const char* env = std::getenv("SCQ_SEED")) {
    char* end = nullptr;
    errno = 0;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || errno == ERANGE || v > static_cast<unsigned long>(cap))
      fail(ErrorCode::InvalidConfig,
           std::string("SCQ_SEED ('") + env + "') is not a valid seed");
    return static_cast<std::uint32_t>(v);
  }
  return 1;
}

inline const char* stop_name(StopReason r) {
  return r == StopReason::Converged ? "converged" : "max-iter";
}

inline const char* source_name(ScaleSource s) {
  switch (s) {
    case ScaleSource::Formula: return "formula";
    case ScaleSource::MaxVar: return "max-var";
    case ScaleSource::Override: return "override";
  }
  return "?";
}

}  // namespace detail

/**
 * The command-line surface. Parses `args` (without the program name), runs
 * one subcommand, and returns the process exit code: 0 success, 1 usage,
 * 2 bad data or files, 3 numerical failure. Results go to `out`, diagnostics
 * and errors to `err`.
 */
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"linear binary hashing: learn, apply, and score compact codes"};
  app.name("scq");
  app.require_subcommand(1);

  std::string method_s, features_path, model_path, out_path;
  long long bits = 0, pca_dim = 512, max_iter = 100, seed_value = 0;
  double scale_value = 0.0, mu = 0.02, eps = 1e-4;
  bool no_pca = false;

  auto* train = app.add_subcommand("train", "fit a hash model from a feature file");
  train->add_option("--method", method_s, "one, oge, or itq")
      ->required()
      ->check(CLI::IsMember({"one", "oge", "itq"}));
  train->add_option("--features", features_path, "training features (binary or csv)")
      ->required();
  train->add_option("--bits", bits, "code length")->required();
  train->add_option("--pca-dim", pca_dim, "reduce wider inputs to this many dimensions");
  train->add_flag("--no-pca", no_pca, "never reduce, whatever the input width");
  auto* scale_opt = train->add_option("--scale", scale_value, "fixed scale instead of the spectrum formula");
  train->add_option("--mu", mu, "norm penalty weight (oge)");
  train->add_option("--eps", eps, "relative improvement stopping threshold");
  train->add_option("--max-iter", max_iter, "outer iteration cap");
  auto* train_seed = train->add_option("--seed", seed_value, "initialization seed");
  train->add_option("--out", out_path, "model file to write")->required();

  auto* enc = app.add_subcommand("encode", "hash a feature file with a trained model");
  enc->add_option("--model", model_path, "model file")->required();
  enc->add_option("--features", features_path, "features to hash")->required();
  enc->add_option("--out", out_path, "code file to write")->required();

  std::string db_codes, db_labels, query_codes, query_labels;
  long long k = 1000;
  bool json = false;
  auto* eval = app.add_subcommand("eval", "score retrieval quality of code files");
  eval->add_option("--db-codes", db_codes)->required();
  eval->add_option("--db-labels", db_labels)->required();
  eval->add_option("--query-codes", query_codes)->required();
  eval->add_option("--query-labels", query_labels)->required();
  eval->add_option("--k", k, "cutoff for precision@k");
  eval->add_flag("--json", json, "machine-readable output at full precision");

  double grid_lo = 0.0, grid_hi = 0.0;
  long long points = 16;
  auto* analyze = app.add_subcommand("analyze-scale", "sweep the scale and tabulate the trade-off");
  analyze->add_option("--features", features_path)->required();
  analyze->add_option("--bits", bits)->required();
  auto* lo_opt = analyze->add_option("--grid-lo", grid_lo, "smallest scale (default: formula/8)");
  auto* hi_opt = analyze->add_option("--grid-hi", grid_hi, "largest scale (default: 8x formula)");
  analyze->add_option("--points", points, "grid size");
  auto* analyze_seed = analyze->add_option("--seed", seed_value, "initialization seed");
  analyze->add_option("--out", out_path, "csv table to write")->required();

  try {
    std::vector<std::string> argv_s;
    argv_s.reserve(args.size() + 1);
    argv_s.emplace_back("scq");
    argv_s.insert(argv_s.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(argv_s.size());
    for (const auto& s : argv_s) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      FitOptions opt;
      opt.method = method_s == "one"   ? Method::OnE
                   : method_s == "oge" ? Method::OgE
                                       : Method::ITQ;
      opt.train.L = bits;
      opt.train.eps = eps;
      opt.train.mu = mu;
      opt.train.max_iter = static_cast<int>(max_iter);
      opt.train.seed = detail::resolve_seed(train_seed->count() > 0, seed_value);
      if (scale_opt->count() > 0) opt.train.scale_override = scale_value;
      opt.pca_dim = pca_dim;
      opt.use_pca = !no_pca;

      const Matrix raw = read_features(features_path);
      const FitResult r = fit(raw, opt);
      save_model(out_path, r.model);
      err << "trained " << method_name(r.model.method) << ": " << raw.rows() << " samples, "
          << raw.cols() << " -> " << (r.model.pca ? r.model.pca->cols() : raw.cols())
          << " dims, " << r.model.L << " bits\n";
      err << "scale s=" << r.s_used << " (" << detail::source_name(r.scale_source)
          << "), s_max_var=" << r.s_max_var << "\n";
      err << "iterations=" << r.trace.values.size() << ", final loss="
          << (r.trace.values.empty() ? 0.0 : r.trace.values.back()) << ", stop="
          << detail::stop_name(r.trace.stop_reason) << "\n";
      if (r.trace.degenerate_columns > 0)
        err << "restarted " << r.trace.degenerate_columns << " degenerate columns\n";
      err << "wrote " << out_path << "\n";
    } else if (enc->parsed()) {
      const HashModel m = load_model(model_path);
      const Matrix raw = read_features(features_path);
      std::vector<Index> flagged;
      const BinaryCodes codes = encode(raw, m, &flagged);
      write_codes(out_path, codes);
      err << "encoded " << codes.n() << " samples at " << codes.L() << " bits";
      if (!flagged.empty()) err << " (" << flagged.size() << " on a bit boundary)";
      err << "\nwrote " << out_path << "\n";
    } else if (eval->parsed()) {
      const BinaryCodes db = read_codes(db_codes);
      const BinaryCodes q = read_codes(query_codes);
      const EvalResult res =
          evaluate_all(db, read_labels(db_labels), q, read_labels(query_labels), k);
      if (json) {
        out << "{\"map\": " << detail::g17(res.map)
            << ", \"precision_at_r2\": " << detail::g17(res.prec_at_r2)
            << ", \"precision_at_k\": " << detail::g17(res.prec_at_k) << ", \"k\": " << res.k
            << "}\n";
      } else {
        out << "mAP: " << detail::pct(res.map) << "%\n";
        out << "precision@r2: " << detail::pct(res.prec_at_r2) << "%\n";
        out << "precision@" << res.k << ": " << detail::pct(res.prec_at_k) << "%\n";
      }
      err << "scored " << q.n() << " queries against " << db.n() << " samples\n";
    } else if (analyze->parsed()) {
      const Matrix raw = read_features(features_path);
      auto [X, mean] = zero_center(raw);
      const Vector variances = gram_eigenvalues_desc(X) / static_cast<double>(X.n());
      const double s_formula = compute_scale(variances, bits);
      const double lo = lo_opt->count() > 0 ? grid_lo : s_formula / 8.0;
      const double hi = hi_opt->count() > 0 ? grid_hi : 8.0 * s_formula;
      TrainConfig cfg;
      cfg.seed = detail::resolve_seed(analyze_seed->count() > 0, seed_value);
      const auto rows = sweep_scale(X, bits, log_spaced_grid(lo, hi, points), cfg);
      write_sweep_table(out_path, rows);
      std::size_t failures = 0;
      for (const auto& r : rows)
        if (!r.error.empty()) ++failures;
      err << "swept " << rows.size() << " scales in [" << lo << ", " << hi
          << "]; formula s=" << s_formula << ", s_max_var=" << compute_s_max_var(X) << "\n";
      if (failures > 0) err << failures << " grid points failed; see the table\n";
      err << "wrote " << out_path << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace scq
