#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fpfgnn/interface.hpp"

using namespace fpfgnn;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Raised for user-facing failures; main() prints it as one JSON line.
struct CliError : std::runtime_error {
  CliError(std::string code, const std::string& message) : std::runtime_error(message), code(std::move(code)) {}
  std::string code;
};

void fail_line(const std::string& code, const std::string& message, const std::string& path = {}) {
  json err{{"code", code}, {"message", message}};
  if (!path.empty()) err["path"] = path;
  std::cerr << json{{"error", err}}.dump() << std::endl;
}

std::string read_input(const std::string& path) {
  try {
    return read_file(path);
  } catch (const std::exception& e) {
    throw CliError("missing_file", e.what());
  }
}

std::string checkpoint_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv(kCheckpointEnv);
  return env ? env : "";
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return train_config_from_json(json::parse(read_input(path)));
  } catch (const json::exception& e) {
    throw CliError("schema_violation", path + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
  } else {
    write_file(path, text);
  }
}

void print_epoch(const std::string& name, const EpochLog& e) {
  json line{{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss},
            {"val_iou_micro", e.val_iou_micro}, {"seconds", e.seconds}};
  if (!name.empty()) line["variant"] = name;
  std::cerr << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floorplan layout prediction with a factor graph neural network"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::uint64_t gen_seed = 0;
  int gen_count = 0, gen_val = 0, gen_min = 5, gen_max = 8;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Dataset seed")->required();
  gen->add_option("--count", gen_count, "Number of plans")->required()->check(CLI::PositiveNumber);
  gen->add_option("--val", gen_val, "How many plans go to the validation split")->check(CLI::NonNegativeNumber);
  gen->add_option("--min-rooms", gen_min, "Fewest rooms per plan")->check(CLI::PositiveNumber);
  gen->add_option("--max-rooms", gen_max, "Most rooms per plan")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output file")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_config, tr_out;
  int tr_epochs = -1, tr_threads = -1;
  tr->add_option("--data", tr_data, "Dataset file")->required();
  tr->add_option("--config", tr_config, "Training config JSON");
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--epochs", tr_epochs, "Override the config's epoch count")->check(CLI::PositiveNumber);
  tr->add_option("--threads", tr_threads, "Override the worker thread count")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_data, ev_ckpt, ev_report, ev_split = "val";
  int ev_dropped = 0;
  bool ev_gt = false, ev_text = false;
  ev->add_option("--data", ev_data, "Dataset file")->required();
  ev->add_option("--checkpoint", ev_ckpt, std::string("Checkpoint (default $") + kCheckpointEnv + ")");
  ev->add_option("--report", ev_report, "Report output path (default stdout)");
  ev->add_option("--split", ev_split, "Plans to evaluate")->check(CLI::IsMember({"train", "val", "all"}));
  ev->add_option("--dropped", ev_dropped, "Rooms dropped to type-only before inference")->check(CLI::NonNegativeNumber);
  ev->add_flag("--ground-truth", ev_gt, "Score the ground-truth boxes instead of a model");
  ev->add_flag("--text", ev_text, "Aligned text report instead of JSON");

  auto* inf = app.add_subcommand("infer", "Predict room boxes for one plan");
  std::string inf_plan, inf_ckpt, inf_raster, inf_out;
  bool inf_dump = false;
  inf->add_option("--plan", inf_plan, "Plan JSON")->required();
  inf->add_option("--checkpoint", inf_ckpt, std::string("Checkpoint (default $") + kCheckpointEnv + ")");
  inf->add_option("--raster", inf_raster, "Write the layout raster as PNG");
  inf->add_option("--out", inf_out, "Output path (default stdout)");
  inf->add_flag("--dump-graph", inf_dump, "Include the factor graph in the output");

  auto* ab = app.add_subcommand("ablate", "Train and compare model variants");
  std::string ab_data, ab_config, ab_variants, ab_out;
  ab->add_option("--data", ab_data, "Dataset file")->required();
  ab->add_option("--config", ab_config, "Training config JSON");
  ab->add_option("--variants", ab_variants, "Comma-separated variant names (default all)");
  ab->add_option("--out", ab_out, "Also write rows as JSON");

  auto* sv = app.add_subcommand("serve", "Run the HTTP inference service");
  std::string sv_ckpt, sv_addr = "127.0.0.1:8080", sv_pool;
  sv->add_option("--checkpoint", sv_ckpt, std::string("Checkpoint (default $") + kCheckpointEnv + ")");
  sv->add_option("--addr", sv_addr, "host:port to listen on");
  sv->add_option("--pool", sv_pool, "Dataset whose plans back /retrieve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    fail_line("usage", msg);
    return 2;
  }

  try {
    if (*gen) {
      GeneratorConfig gc;
      gc.min_rooms = gen_min;
      gc.max_rooms = gen_max;
      if (gen_val > gen_count) throw CliError("usage", "--val exceeds --count");
      try {
        gc.check();
      } catch (const std::invalid_argument& e) {
        throw CliError("usage", e.what());
      }
      write_file(gen_out, save_dataset(make_dataset(gen_seed, gen_count, gen_val, gc)));
    } else if (*tr) {
      TrainConfig cfg = load_train_config(tr_config);
      if (tr_epochs > 0) cfg.epochs = tr_epochs;
      if (tr_threads > 0) cfg.threads = tr_threads;
      const Dataset data = load_dataset(read_input(tr_data));
      const TrainResult r = train(data, cfg, [](const EpochLog& e) { print_epoch({}, e); });
      write_file(tr_out, serialize_checkpoint(r.best));
    } else if (*ev) {
      const Dataset data = load_dataset(read_input(ev_data));
      std::vector<std::size_t> idx;
      if (ev_split == "all") {
        for (std::size_t i = 0; i < data.plans.size(); ++i) idx.push_back(i);
      } else {
        idx = data.indices(ev_split == "val" ? Split::Val : Split::Train);
      }
      if (idx.empty()) throw CliError("usage", "split '" + ev_split + "' has no plans");
      MetricsReport rep;
      if (ev_gt) {
        std::vector<FloorplanSpec> plans;
        std::vector<std::vector<BBox>> boxes;
        for (std::size_t i : idx) {
          plans.push_back(data.plans[i]);
          boxes.push_back(data.plans[i].ground_truth_boxes());
        }
        rep = evaluate_predictions(plans, plans, boxes);
      } else {
        const std::string path = checkpoint_path(ev_ckpt);
        if (path.empty()) throw CliError("usage", "--checkpoint or $" + std::string(kCheckpointEnv) + " is required");
        const auto m = load_model_file(path);
        EvalOptions opt;
        opt.dropped = ev_dropped;
        rep = evaluate(m->model, data, idx, opt);
      }
      write_output(ev_report, ev_text ? format_report(rep) : to_json(rep).dump(2));
    } else if (*inf) {
      ordered_json plan_json;
      try {
        plan_json = ordered_json::parse(read_input(inf_plan));
      } catch (const json::parse_error& e) {
        throw CliError("malformed_request", inf_plan + ": " + e.what());
      }
      const std::string path = checkpoint_path(inf_ckpt);
      if (path.empty() && !inf_dump)
        throw CliError("usage", "--checkpoint or $" + std::string(kCheckpointEnv) + " is required");
      ordered_json out;
      FactorGraphConfig graph_cfg;
      if (!path.empty()) {
        InferenceService svc;
        svc.set_model(load_model_file(path));
        graph_cfg = svc.model()->model.config.graph;
        const HttpResponse r = svc.infer(ordered_json{{"plan", plan_json}, {"return_raster", !inf_raster.empty()}});
        if (r.status != 200) {
          const json err = json::parse(r.body)["error"];
          throw CliError(err["code"], err["message"].get<std::string>() +
                                          (err.contains("path") ? " at " + err["path"].get<std::string>() : ""));
        }
        out = ordered_json::parse(r.body);
        if (!inf_raster.empty()) {
          const auto& rj = out["raster"];
          write_png(run_length_decode(rj["rle"].get<std::vector<int>>(), rj["width"], rj["height"]), inf_raster);
          out.erase("raster");
        }
      }
      if (inf_dump) {
        FloorplanSpec spec;
        try {
          spec = plan_from_json(plan_json);
        } catch (const ParseError& e) {
          throw CliError(e.semantic() ? "semantic_violation" : "malformed_request",
                         std::string(e.what()) + " at " + e.path());
        }
        out["graph"] = ordered_json::parse(graph_to_json(build_factor_graph(spec, graph_cfg)).dump());
      }
      write_output(inf_out, out.dump(2));
    } else if (*ab) {
      const TrainConfig cfg = load_train_config(ab_config);
      const Dataset data = load_dataset(read_input(ab_data));
      const std::vector<std::string> names = ab_variants.empty() ? all_ablation_names() : split_list(ab_variants);
      std::vector<AblationVariant> variants;
      try {
        variants = ablation_variants(cfg.model, names);
      } catch (const std::invalid_argument& e) {
        throw CliError("usage", e.what());
      }
      const auto rows = run_ablation(data, cfg, variants, print_epoch);
      std::cout << format_ablation(rows);
      if (!ab_out.empty()) {
        json j = json::array();
        for (const AblationRow& r : rows) j.push_back({{"variant", r.name}, {"metrics", to_json(r.metrics)}});
        write_file(ab_out, j.dump(2));
      }
    } else if (*sv) {
      std::pair<std::string, int> addr;
      try {
        addr = parse_address(sv_addr);
      } catch (const std::invalid_argument& e) {
        throw CliError("usage", e.what());
      }
      std::vector<FloorplanSpec> pool;
      if (!sv_pool.empty()) pool = load_dataset(read_input(sv_pool)).plans;
      InferenceService svc(std::move(pool));
      const std::string path = checkpoint_path(sv_ckpt);
      if (!path.empty()) svc.set_model(load_model_file(path));
      HttpServer server(svc);
      const int port = server.bind(addr.first, addr.second);
      std::cerr << json{{"listening", addr.first + ":" + std::to_string(port)}, {"model_loaded", !path.empty()}}.dump()
                << std::endl;
      server.listen();
    }
  } catch (const CliError& e) {
    fail_line(e.code, e.what());
    return 1;
  } catch (const ParseError& e) {
    fail_line(e.semantic() ? "semantic_violation" : "schema_violation", e.what(), e.path());
    return 1;
  } catch (const json::exception& e) {
    fail_line("schema_violation", e.what());
    return 1;
  } catch (const std::exception& e) {
    fail_line("error", e.what());
    return 1;
  }
  return 0;
}
