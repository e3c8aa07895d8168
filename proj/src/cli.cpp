#include "gsae/cli.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsae/benchgen.hpp"
#include "gsae/dataset.hpp"
#include "gsae/detection.hpp"
#include "gsae/fms.hpp"
#include "gsae/io_util.hpp"
#include "gsae/model.hpp"
#include "gsae/steering.hpp"
#include "gsae/train.hpp"

namespace gsae {

namespace {

struct GlobalFlags {
  std::uint64_t seed = 0;
  int threads = 1;
  bool json = false;
  bool quiet = false;
};

std::vector<int> parse_p_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int p = std::stoi(item, &used);
      if (used != item.size() || p < 1) throw std::invalid_argument("");
      out.push_back(p);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse p list entry \"" + item + "\"");
    }
  }
  if (out.empty()) throw ConfigError("p list is empty");
  return out;
}

struct GenArgs {
  std::string out_path;
  std::string truth_path;
  std::string oracle_path;
  int oracle_latents = 0;
  double oracle_gain = 10.0;
  SyntheticConfig config;
};

int do_gen(const GlobalFlags& g, GenArgs& args, std::ostream& out) {
  args.config.seed = g.seed;
  auto [dataset, truth] = generate_planted(args.config);
  save_dataset(dataset, args.out_path);

  const std::string truth_path =
      args.truth_path.empty() ? args.out_path + ".truth.gsad" : args.truth_path;
  save_ground_truth(truth, truth_path);

  std::string oracle_path;
  if (!args.oracle_path.empty()) {
    const int m = args.oracle_latents > 0 ? args.oracle_latents
                                          : args.config.n_concepts + args.config.n_nuisance;
    save_model(oracle_model(truth, m, args.oracle_gain), args.oracle_path);
    oracle_path = args.oracle_path;
  }

  if (g.json) {
    nlohmann::json doc{{"dataset", args.out_path},
                       {"truth", truth_path},
                       {"rows", dataset.n_rows()},
                       {"dim", dataset.dim()},
                       {"concepts", dataset.n_concepts()},
                       {"nuisance", args.config.n_nuisance},
                       {"seed", g.seed}};
    doc["oracle_model"] = oracle_path.empty() ? nlohmann::json() : nlohmann::json(oracle_path);
    out << doc.dump(2) << "\n";
  } else if (!g.quiet) {
    out << "wrote dataset " << args.out_path << " (rows=" << dataset.n_rows()
        << ", d=" << dataset.dim() << ", concepts=" << dataset.n_concepts() << ")\n";
    out << "wrote ground truth " << truth_path << "\n";
    if (!oracle_path.empty()) out << "wrote oracle model " << oracle_path << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string data_path;
  std::string out_path;
  std::string warm_start;
  int latent_dim = 0;
  int latent_mult = 4;
  int k = 16;
  bool no_cond = false;
  bool paper_hparams = false;
  TrainConfig config;
  bool epochs_set = false, lr_set = false, batch_set = false, k_set = false, mult_set = false;
};

int do_train(const GlobalFlags& g, TrainArgs& args, std::ostream& out) {
  const ActivationDataset dataset = load_dataset(args.data_path);

  TrainConfig config = args.paper_hparams ? TrainConfig::paper_preset() : TrainConfig{};
  if (args.epochs_set) config.epochs = args.config.epochs;
  if (args.lr_set) config.learning_rate = args.config.learning_rate;
  if (args.batch_set) config.batch_size = args.config.batch_size;
  config.condition_weight = args.no_cond ? 0.0 : 1.0;
  config.seed = g.seed;
  if (!args.warm_start.empty()) config.warm_start = args.warm_start;

  ModelArch arch;
  arch.d = static_cast<int>(dataset.dim());
  const int mult = args.mult_set ? args.latent_mult : (args.paper_hparams ? 6 : args.latent_mult);
  arch.m = args.latent_dim > 0 ? args.latent_dim : mult * arch.d;
  arch.k = args.k_set ? args.k : (args.paper_hparams ? 2048 : args.k);
  arch.n_conditioned = args.no_cond ? 0 : static_cast<int>(dataset.n_concepts());

  auto [model, history] = train(dataset, config, arch);
  save_model(model, args.out_path);

  if (g.json) {
    nlohmann::json doc{{"model", args.out_path},
                       {"d", arch.d},
                       {"m", arch.m},
                       {"k", arch.k},
                       {"n_conditioned", arch.n_conditioned},
                       {"epochs", config.epochs},
                       {"vanilla", args.no_cond},
                       {"final_recon_loss", history.recon.back()},
                       {"final_condition_loss", history.cond.back()},
                       {"history_recon", history.recon},
                       {"history_cond", history.cond}};
    out << doc.dump(2) << "\n";
  } else {
    if (!g.quiet) {
      for (std::size_t e = 0; e < history.recon.size(); ++e) {
        out << "epoch " << (e + 1) << ": L_r=" << history.recon[e]
            << " L_c=" << history.cond[e] << "\n";
      }
    }
    out << "wrote model " << args.out_path << " (m=" << arch.m << ", k=" << arch.k
        << ", conditioned=" << arch.n_conditioned << ", final L_r=" << history.recon.back()
        << ")\n";
  }
  return 0;
}

struct FmsArgs {
  std::string data_path;
  std::string model_path;
  std::string p_list = "1,5";
  std::string mean_mode = "arithmetic";
  std::string curves_csv;
  bool no_oversample = false;
  FmsConfig config;
};

void write_curves_csv(const std::vector<FmsReport>& reports, const std::string& path) {
  std::ofstream csv(path);
  if (!csv) throw IoError("cannot open " + path + " for writing");
  csv << "concept,series,index,value\n";
  for (const FmsReport& r : reports) {
    for (std::size_t i = 0; i < r.curves.accs.size(); ++i) {
      csv << r.concept_name << ",accs," << i << "," << r.curves.accs[i] << "\n";
    }
    for (std::size_t i = 0; i < r.curves.accs_cum.size(); ++i) {
      csv << r.concept_name << ",accs_cum," << (i + 1) << "," << r.curves.accs_cum[i] << "\n";
    }
  }
  if (!csv) throw IoError("write to " + path + " failed");
}

int do_fms(const GlobalFlags& g, FmsArgs& args, std::ostream& out) {
  const ActivationDataset dataset = load_dataset(args.data_path);
  const GsaeModel model = load_model(args.model_path);

  FmsConfig config = args.config;
  config.p_values = parse_p_list(args.p_list);
  config.mean_mode = mean_mode_from_string(args.mean_mode);
  config.oversample = !args.no_oversample;
  config.threads = g.threads;
  config.seed = g.seed;

  const std::vector<FmsReport> reports = run_fms(dataset, model, config);
  if (!args.curves_csv.empty()) write_curves_csv(reports, args.curves_csv);

  if (g.json) {
    nlohmann::json concepts = nlohmann::json::array();
    for (const FmsReport& r : reports) concepts.push_back(r.to_json());
    nlohmann::json aggregate;
    for (int p : config.p_values) {
      aggregate[std::to_string(p)] = aggregate_reports(reports, p, config.mean_mode);
    }
    out << nlohmann::json{{"mean_mode", to_string(config.mean_mode)},
                          {"concepts", concepts},
                          {"fms_at", aggregate}}
               .dump(2)
        << "\n";
  } else {
    out << std::fixed << std::setprecision(4);
    for (const FmsReport& r : reports) {
      out << r.concept_name << ": accs_0=" << r.curves.accs_0
          << " fms_global=" << r.fms_global_score;
      for (int p : config.p_values) out << " fms_local@" << p << "=" << r.fms_local_at.at(p);
      for (int p : config.p_values) out << " fms@" << p << "=" << r.fms_at.at(p);
      out << " root=" << r.curves.removed_features.front() << "\n";
    }
    for (int p : config.p_values) {
      out << "aggregate fms@" << p << "=" << aggregate_reports(reports, p, config.mean_mode)
          << "\n";
    }
    out.unsetf(std::ios::fixed);
  }
  return 0;
}

struct DetectArgs {
  std::string data_path;
  std::string model_path;
  double threshold = 0.5;
};

int do_detect(const GlobalFlags& g, DetectArgs& args, std::ostream& out) {
  const ActivationDataset dataset = load_dataset(args.data_path);
  const GsaeModel model = load_model(args.model_path);
  const DetectionReport report = detect_concepts(model, dataset, args.threshold, g.threads);

  if (g.json) {
    out << report.to_json().dump(2) << "\n";
  } else {
    out << std::fixed << std::setprecision(4);
    for (const ConceptDetection& c : report.concepts) {
      out << c.concept_name << ": present=" << c.n_present << " absent=" << c.n_absent
          << " accuracy=" << c.accuracy << " rbc=" << c.rbc << " U=" << c.u
          << " p=" << c.p_value << "\n";
    }
    out.unsetf(std::ios::fixed);
  }
  return 0;
}

struct SteerArgs {
  std::string data_path;
  std::string model_path;
  std::string out_path;
  std::string targets;
  std::string gamma = "auto";
};

int do_steer(const GlobalFlags& g, SteerArgs& args, std::ostream& out, std::ostream& err) {
  const ActivationDataset dataset = load_dataset(args.data_path);
  const GsaeModel model = load_model(args.model_path);

  SteeringConfig config;
  config.targets = parse_steering_targets(args.targets);
  if (args.gamma == "balanced") config.gamma_mode = GammaMode::balanced;
  else if (args.gamma == "constant_one") config.gamma_mode = GammaMode::constant_one;
  else if (args.gamma != "auto") throw ConfigError("unknown gamma mode \"" + args.gamma + "\"");

  for (const SteeringTarget& t : config.targets) {
    if (std::abs(t.alpha) > 1.0) {
      err << "warning: |alpha| = " << std::abs(t.alpha) << " for concept " << t.concept_index
          << " exceeds 1; generations may leave the data distribution\n";
    }
  }

  const ActivationDataset steered = steer_dataset(dataset, model, config, g.threads);
  save_dataset(steered, args.out_path);

  if (g.json) {
    nlohmann::json targets = nlohmann::json::array();
    for (const SteeringTarget& t : config.targets) {
      targets.push_back({{"concept_index", t.concept_index},
                         {"direction",
                          t.direction == SteerDirection::increase ? "increase" : "decrease"},
                         {"alpha", t.alpha}});
    }
    out << nlohmann::json{{"out", args.out_path},
                          {"rows", steered.n_rows()},
                          {"gamma_mode", config.resolved_gamma_mode() == GammaMode::balanced
                                             ? "balanced"
                                             : "constant_one"},
                          {"targets", targets}}
               .dump(2)
        << "\n";
  } else if (!g.quiet) {
    out << "wrote steered dataset " << args.out_path << " (rows=" << steered.n_rows() << ")\n";
  }
  return 0;
}

int do_inspect(const GlobalFlags& g, const std::string& path, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw CorruptionError("file shorter than a magic number");
  in.seekg(0);

  nlohmann::json doc;
  if (std::string(magic, 4) == "GSAD") {
    const DatasetHeader h = read_dataset_header(in);
    // Skip the payload; the trailer holds the concept names.
    const std::uint64_t payload =
        std::uint64_t{4} * h.n_rows * (std::uint64_t{h.dim} + h.n_concepts);
    in.seekg(static_cast<std::streamoff>(payload), std::ios::cur);
    const std::uint32_t trailer_size = read_u32le(in, "trailer length");
    std::string trailer_text(trailer_size, '\0');
    read_exact(in, trailer_text.data(), trailer_size, "trailer");
    const auto trailer = nlohmann::json::parse(trailer_text);
    doc = {{"type", "dataset"}, {"path", path},   {"version", h.version},
           {"rows", h.n_rows},  {"dim", h.dim},   {"concepts", h.n_concepts},
           {"dtype", "float32"}, {"concept_names", trailer["concept_names"]}};
  } else if (std::string(magic, 4) == "GSAM") {
    const ModelHeader h = read_model_header(in);
    doc = {{"type", "model"},       {"path", path}, {"version", h.version},
           {"dim", h.dim},          {"latent_dim", h.latent_dim},
           {"k", h.k},              {"n_conditioned", h.n_conditioned}};
  } else {
    throw FormatError(path + " has unknown magic \"" + std::string(magic, 4) + "\"");
  }

  if (g.json) {
    out << doc.dump(2) << "\n";
  } else {
    for (const auto& [key, value] : doc.items()) {
      out << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"guided sparse autoencoder toolkit: synthetic benchmarks, training, "
               "monosemanticity measurement, detection, and steering"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "master seed for all randomness");
  app.add_option("--threads", g.threads, "worker thread cap (default 1, fully deterministic)");
  app.add_flag("--json", g.json, "emit a single JSON document on stdout");
  app.add_flag("--quiet", g.quiet, "suppress informational output");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a planted-concept dataset");
  gen->fallthrough();
  gen->add_option("--out", gen_args.out_path, "output .gsad path")->required();
  gen->add_option("--truth", gen_args.truth_path, "ground-truth sidecar path");
  gen->add_option("--d", gen_args.config.dim, "activation dimension");
  gen->add_option("--concepts", gen_args.config.n_concepts, "number of planted concepts");
  gen->add_option("--nuisance", gen_args.config.n_nuisance, "number of nuisance directions");
  gen->add_option("--n", gen_args.config.n_samples, "number of rows");
  gen->add_option("--concept-prob", gen_args.config.concept_prob, "concept presence probability");
  gen->add_option("--signal-scale", gen_args.config.signal_scale, "planted signal scale");
  gen->add_option("--noise-std", gen_args.config.noise_std, "isotropic noise std");
  gen->add_option("--oracle-model", gen_args.oracle_path, "also write the oracle .gsam here");
  gen->add_option("--oracle-latents", gen_args.oracle_latents,
                  "oracle latent dimension (default: concepts + nuisance)");
  gen->add_option("--oracle-gain", gen_args.oracle_gain, "oracle encoder gain");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a (guided) sparse autoencoder");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train_args.data_path, "input .gsad path")->required();
  train_cmd->add_option("--out", train_args.out_path, "output .gsam path")->required();
  train_cmd->add_option("--m", train_args.latent_dim, "latent dimension (overrides --latent-mult)");
  auto* mult_opt =
      train_cmd->add_option("--latent-mult", train_args.latent_mult, "latent dim = mult * d");
  auto* k_opt = train_cmd->add_option("--k", train_args.k, "sparsity budget");
  auto* epochs_opt = train_cmd->add_option("--epochs", train_args.config.epochs, "epochs");
  auto* lr_opt = train_cmd->add_option("--lr", train_args.config.learning_rate, "learning rate");
  auto* batch_opt = train_cmd->add_option("--batch", train_args.config.batch_size, "batch size");
  train_cmd->add_flag("--no-cond", train_args.no_cond, "train a vanilla SAE (no condition loss)");
  train_cmd->add_option("--warm-start", train_args.warm_start, "resume from a checkpoint");
  train_cmd->add_flag("--paper-hparams", train_args.paper_hparams,
                      "full-scale preset: k=2048, latent mult 6, lr 1e-5, batch 2048, 100 epochs");

  FmsArgs fms_args;
  CLI::App* fms_cmd = app.add_subcommand("fms", "measure feature monosemanticity");
  fms_cmd->fallthrough();
  fms_cmd->add_option("--data", fms_args.data_path, "input .gsad path")->required();
  fms_cmd->add_option("--model", fms_args.model_path, "input .gsam path")->required();
  fms_cmd->add_option("--p", fms_args.p_list, "comma list of removal counts (default 1,5)");
  fms_cmd->add_option("--epsilon", fms_args.config.epsilon, "capacity target 1 - epsilon");
  fms_cmd->add_option("--max-depth", fms_args.config.max_depth, "tree depth cap");
  fms_cmd->add_option("--max-rounds", fms_args.config.max_ablation_rounds, "ablation round cap");
  fms_cmd->add_option("--band", fms_args.config.convergence_band,
                      "convergence band around chance accuracy");
  fms_cmd->add_option("--mean", fms_args.mean_mode, "aggregation: arithmetic or harmonic");
  fms_cmd->add_option("--eval-frac", fms_args.config.eval_fraction, "held-out eval fraction");
  fms_cmd->add_flag("--no-oversample", fms_args.no_oversample,
                    "skip minority oversampling of the tree splits");
  fms_cmd->add_option("--curves-csv", fms_args.curves_csv, "write plot-ready curves here");

  DetectArgs detect_args;
  CLI::App* detect_cmd = app.add_subcommand("detect", "read conditioned concept activations");
  detect_cmd->fallthrough();
  detect_cmd->add_option("--data", detect_args.data_path, "input .gsad path")->required();
  detect_cmd->add_option("--model", detect_args.model_path, "input .gsam path")->required();
  detect_cmd->add_option("--threshold", detect_args.threshold, "presence threshold");

  SteerArgs steer_args;
  CLI::App* steer_cmd = app.add_subcommand("steer", "apply steering vectors to a dataset");
  steer_cmd->fallthrough();
  steer_cmd->add_option("--data", steer_args.data_path, "input .gsad path")->required();
  steer_cmd->add_option("--model", steer_args.model_path, "input .gsam path")->required();
  steer_cmd->add_option("--out", steer_args.out_path, "output .gsad path")->required();
  steer_cmd->add_option("--targets", steer_args.targets,
                        "comma list of +i:alpha / -i:alpha entries")
      ->required();
  steer_cmd->add_option("--gamma", steer_args.gamma, "auto, balanced, or constant_one");

  std::string inspect_path;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "print file header metadata");
  inspect_cmd->fallthrough();
  inspect_cmd->add_option("--file", inspect_path, "path to a .gsad or .gsam file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return do_gen(g, gen_args, out);
    if (train_cmd->parsed()) {
      train_args.epochs_set = epochs_opt->count() > 0;
      train_args.lr_set = lr_opt->count() > 0;
      train_args.batch_set = batch_opt->count() > 0;
      train_args.k_set = k_opt->count() > 0;
      train_args.mult_set = mult_opt->count() > 0;
      return do_train(g, train_args, out);
    }
    if (fms_cmd->parsed()) return do_fms(g, fms_args, out);
    if (detect_cmd->parsed()) return do_detect(g, detect_args, out);
    if (steer_cmd->parsed()) return do_steer(g, steer_args, out, err);
    if (inspect_cmd->parsed()) return do_inspect(g, inspect_path, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace gsae
