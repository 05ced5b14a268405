#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ossl/cli.hpp"
#include "ossl/eval.hpp"
#include "ossl/report.hpp"
#include "ossl/tsne.hpp"

namespace ossl::cli {

namespace {

template <typename F>
int guarded(const char* command, F body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "ossl " << command << ": config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NonFiniteError& e) {
    std::cerr << "ossl " << command << ": numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "ossl " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "ossl " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {  // ValueError, DimensionError
    std::cerr << "ossl " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ossl " << command << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "ossl " << command << ": " << e.what() << "\n";
    return kExitValidation;
  }
}

fs::path default_output_dir(const fs::path& config_path) {
  const char* root = std::getenv(kOutputRootEnv);
  const fs::path parent = root && *root ? fs::path(root) : fs::path("runs");
  return fs::absolute(parent / config_path.stem());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<ChannelNorm> run_normalization(RunConfig& cfg) {
  if (!cfg.normalize) return {};
  if (!cfg.normalize_stats) {
    const LabeledImageSet raw = load_dataset(cfg.train_set, cfg.model);
    cfg.normalize_stats = channel_statistics(preprocess(raw, preprocess_spec(cfg.train_set, cfg.model, {})));
  }
  return *cfg.normalize_stats;
}

LabeledImageSet prepared(const DatasetSpec& spec, const ModelConfig& model, const std::vector<ChannelNorm>& norm,
                         SetRole role) {
  LabeledImageSet set = preprocess(load_dataset(spec, model), preprocess_spec(spec, model, norm));
  set.role = role;
  return set;
}

// "--dataset" is either a dataset name from --config or "<format>:<path>[,<path>...]".
LabeledImageSet resolve_dataset(const std::string& arg, std::optional<RunConfig>& rc, const ModelConfig& model) {
  std::vector<ChannelNorm> norm;
  if (rc) norm = run_normalization(*rc);
  if (rc) {
    if (rc->train_set.name == arg) return prepared(rc->train_set, model, norm, SetRole::train);
    for (const auto& t : rc->test_sets) {
      if (t.name == arg) return prepared(t, model, norm, SetRole::ood_test);
    }
  }
  const auto colon = arg.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("--dataset", "'" + arg + "' is neither a dataset named in --config nor <format>:<path>");
  }
  DatasetSpec spec;
  spec.format = arg.substr(0, colon);
  std::stringstream ss(arg.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) spec.paths.emplace_back(item);
  if (spec.format != "idx" && spec.format != "cifar" && spec.format != "raw") {
    throw ConfigError("--dataset", "unknown format '" + spec.format + "' (expected idx, cifar or raw)");
  }
  if ((spec.format == "idx" && spec.paths.size() != 2) || (spec.format == "raw" && spec.paths.size() != 1) ||
      spec.paths.empty()) {
    throw ConfigError("--dataset", "wrong number of paths for format '" + spec.format + "'");
  }
  for (const auto& p : spec.paths) {
    if (!fs::is_regular_file(p)) throw ConfigError("--dataset", "file not found: " + p.string());
  }
  spec.name = spec.paths.front().stem().string();
  return prepared(spec, model, norm, SetRole::ood_test);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  return guarded("train", [&] {
    RunConfig cfg = load_config(args.config);
    if (args.out) {
      cfg.output_dir = fs::absolute(*args.out);
    } else if (cfg.output_dir.empty()) {
      cfg.output_dir = default_output_dir(args.config);
    }
    fs::create_directories(cfg.output_dir);

    const std::vector<ChannelNorm> norm = run_normalization(cfg);
    const LabeledImageSet train_set = prepared(cfg.train_set, cfg.model, norm, SetRole::train);
    std::vector<LabeledImageSet> tests;
    for (const auto& t : cfg.test_sets) tests.push_back(prepared(t, cfg.model, norm, SetRole::ood_test));

    MultiHeadModel<float> model = build_model<float>(cfg.model);
    write_text(cfg.output_dir / "config.resolved.json", resolved_config_json(cfg));
    const std::string hash = config_hash(cfg);

    std::vector<std::string> names;
    for (const auto& t : tests) names.push_back(t.name);
    const fs::path metrics_path = cfg.output_dir / "metrics.csv";
    std::ofstream metrics(metrics_path, std::ios::trunc | std::ios::binary);
    if (!metrics) throw IoError(metrics_path.string(), "cannot open for writing");
    metrics << metrics_header(names) << '\n' << std::flush;

    TrainOptions options;
    options.checkpoint_path = cfg.output_dir / "checkpoint.ossl";
    options.record_wall_time = cfg.timing == Timing::wall;
    options.config_hash = hash;
    options.on_epoch = [&](const EpochRecord& e) {
      metrics << metrics_row(e) << '\n' << std::flush;
      std::cerr << "epoch " << e.epoch << "/" << cfg.sgd.n_epoch << "  train_acc " << fmt("%.4f", e.train_acc);
      if (e.L_ch) std::cerr << "  L_ch " << fmt("%.4f", *e.L_ch);
      for (std::size_t i = 0; i < e.test_acc.size(); ++i) {
        if (e.test_acc[i]) std::cerr << "  " << names[i] << " " << fmt("%.4f", *e.test_acc[i]);
      }
      std::cerr << "\n";
    };
    const TrainRunRecord record = train(model, train_set, tests, cfg.sgd, options);
    if (!metrics) throw IoError(metrics_path.string(), "write failed");

    nlohmann::ordered_json info;
    info["config_hash"] = hash;
    info["mode"] = std::string(to_string(record.mode));
    info["init_seed"] = record.init_seed;
    info["shuffle_seed"] = record.shuffle_seed;
    info["epochs"] = record.epochs.size();
    info["checkpoint"] = record.checkpoint_path;
    write_text(cfg.output_dir / "run.json", info.dump(2) + "\n");
    std::cout << cfg.output_dir.string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args) {
  return guarded("eval", [&] {
    const MultiHeadModel<float> model = load_checkpoint(args.checkpoint);
    std::optional<RunConfig> rc;
    if (args.config) rc = load_config(*args.config);
    const HeadKind head = parse_head(args.head);
    const LabeledImageSet set = resolve_dataset(args.dataset, rc, model.config());
    const EvalResult r =
        head == HeadKind::rotation ? rotation_accuracy(model, set) : accuracy(model, set, head);
    std::cout << r.dataset << "," << r.head << "," << fmt("%.6f", r.accuracy) << "," << r.count << "\n";
    return kExitOk;
  });
}

int cmd_embed(const EmbedArgs& args) {
  return guarded("embed", [&] {
    const MultiHeadModel<float> model = load_checkpoint(args.checkpoint);
    std::optional<RunConfig> rc;
    if (args.config) rc = load_config(*args.config);
    const LabeledImageSet set = resolve_dataset(args.dataset, rc, model.config());
    const Embeddings e = export_embeddings(model, set, args.out);
    std::cout << args.out.string() << "," << e.rows << "," << e.dim << "\n";
    return kExitOk;
  });
}

int cmd_tsne(const TsneArgs& args) {
  return guarded("tsne", [&] {
    const Embeddings e = load_embeddings(args.embeddings);
    TsneConfig cfg;
    cfg.perplexity = args.perplexity;
    cfg.iterations = args.iterations;
    cfg.seed = args.seed;
    const std::vector<double> data(e.values.begin(), e.values.end());
    const TsneResult res = tsne(data, e.rows, e.dim, cfg);
    std::vector<std::size_t> labels(e.labels.begin(), e.labels.end());
    std::optional<double> sil;
    if (std::set<std::size_t>(labels.begin(), labels.end()).size() >= 2) {
      sil = silhouette_score(res.coords, e.rows, 2, labels);
    }
    std::ostringstream out;
    out << "# perplexity=" << cfg.perplexity << " iterations=" << cfg.iterations
        << " learning_rate=" << cfg.learning_rate << " early_exaggeration=" << cfg.early_exaggeration
        << " exaggeration_iters=" << cfg.exaggeration_iters << " momentum=" << cfg.initial_momentum << "->"
        << cfg.final_momentum << "@" << cfg.momentum_switch_iter << " init_sigma=" << cfg.init_sigma
        << " seed=" << cfg.seed << "\n";
    out << "# kl_final=" << fmt("%.6f", res.kl_history.back());
    if (sil) out << " silhouette=" << fmt("%.6f", *sil);
    out << "\n";
    out << "point_index,x,y,label\n";
    for (std::size_t i = 0; i < e.rows; ++i) {
      out << i << "," << fmt("%.17g", res.coords[2 * i]) << "," << fmt("%.17g", res.coords[2 * i + 1]) << ","
          << e.labels[i] << "\n";
    }
    write_text(args.out, out.str());
    std::cout << args.out.string() << ",kl=" << fmt("%.6f", res.kl_history.back());
    if (sil) std::cout << ",silhouette=" << fmt("%.6f", *sil);
    std::cout << "\n";
    return kExitOk;
  });
}

int cmd_report(const ReportArgs& args) {
  return guarded("report", [&] {
    if (args.runs.empty()) throw ValueError("report needs at least one metrics.csv");
    std::vector<TrainRunRecord> records;
    for (const auto& arg : args.runs) {
      fs::path path = arg;
      std::optional<TrainMode> mode;
      const auto eq = arg.find('=');
      if (eq != std::string::npos) {
        mode = parse_train_mode(arg.substr(0, eq));
        path = arg.substr(eq + 1);
      }
      if (fs::is_directory(path)) path /= "metrics.csv";
      if (!mode) {
        const fs::path resolved = path.parent_path() / "config.resolved.json";
        std::ifstream in(resolved);
        if (!in) {
          throw ConfigError(arg, "no config.resolved.json next to the metrics file; pass <mode>=<path> instead");
        }
        mode = parse_train_mode(nlohmann::json::parse(in).at("sgd").at("mode").get<std::string>());
      }
      records.push_back(read_metrics_csv(path, *mode));
    }
    const ReportTable table = report_table(records);
    const std::string csv = render_csv(table), text = render_text(table);
    if (args.out) {
      write_text(fs::path(args.out->string() + ".csv"), csv);
      write_text(fs::path(args.out->string() + ".txt"), text);
    }
    std::cout << csv << "\n" << text;
    return kExitOk;
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-head rotation self-supervised training engine"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train from a JSON run config");
  train_cmd->add_option("--config", train_args.config, "Run config (JSON)")->required();
  train_cmd->add_option("--out", train_out, "Output directory (default: $" + std::string(kOutputRootEnv) +
                                                "/<config name> or runs/<config name>)");

  EvalArgs eval_args;
  std::string eval_config;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; prints dataset,head,accuracy,n");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.ossl written by train")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "Name from --config, or <idx|cifar|raw>:<path>[,<path>]")
      ->required();
  eval_cmd->add_option("--head", eval_args.head, "semantic, auxiliary or rotation");
  eval_cmd->add_option("--config", eval_config, "Resolved run config supplying preprocessing");

  EmbedArgs embed_args;
  std::string embed_config;
  auto* embed_cmd = app.add_subcommand("embed", "Export backbone features as OSSLEMB1");
  embed_cmd->add_option("--checkpoint", embed_args.checkpoint, "checkpoint.ossl written by train")->required();
  embed_cmd->add_option("--dataset", embed_args.dataset, "Name from --config, or <idx|cifar|raw>:<path>[,<path>]")->required();
  embed_cmd->add_option("--out", embed_args.out, "OSSLEMB1 output file")->required();
  embed_cmd->add_option("--config", embed_config, "Resolved run config supplying preprocessing");

  TsneArgs tsne_args;
  auto* tsne_cmd = app.add_subcommand("tsne", "Exact t-SNE of an OSSLEMB1 file; writes point_index,x,y,label");
  tsne_cmd->add_option("--dataset", tsne_args.embeddings, "OSSLEMB1 embeddings file")->required();
  tsne_cmd->add_option("--out", tsne_args.out, "Coordinates CSV")->required();
  tsne_cmd->add_option("--perplexity", tsne_args.perplexity, "Default 30");
  tsne_cmd->add_option("--iterations", tsne_args.iterations, "Default 1000");
  tsne_cmd->add_option("--seed", tsne_args.seed, "Initialization seed");

  ReportArgs report_args;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Comparison table from metrics.csv files");
  report_cmd->add_option("runs", report_args.runs, "metrics.csv paths or run directories, optionally <mode>=<path>")
      ->required();
  report_cmd->add_option("--out", report_out, "Also write <out>.csv and <out>.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*train_cmd) {
    if (!train_out.empty()) train_args.out = train_out;
    return cmd_train(train_args);
  }
  if (*eval_cmd) {
    if (!eval_config.empty()) eval_args.config = eval_config;
    return cmd_eval(eval_args);
  }
  if (*embed_cmd) {
    if (!embed_config.empty()) embed_args.config = embed_config;
    return cmd_embed(embed_args);
  }
  if (*tsne_cmd) return cmd_tsne(tsne_args);
  if (!report_out.empty()) report_args.out = report_out;
  return cmd_report(report_args);
}

}  // namespace ossl::cli
