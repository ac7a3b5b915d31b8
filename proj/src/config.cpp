#include "ppsim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ppsim/errors.hpp"

namespace ppsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) fail("unknown key '" + it.key() + "' in " + where);
  }
}

const json& require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
  return j;
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  return v.get<double>();
}

long long as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + " must be an integer");
  return v.get<long long>();
}

std::uint64_t as_u64(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(v.get<long long>());
  }
  fail(where + " must be a non-negative integer");
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where + " must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + " must be a string");
  return v.get<std::string>();
}

std::vector<double> as_vector(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_double(e, where + " entry"));
  return out;
}

ConsensusKind parse_consensus(const std::string& s) {
  if (s == "simple_avg") return ConsensusKind::SimpleAvg;
  if (s == "easgd") return ConsensusKind::Easgd;
  if (s == "lsgd") return ConsensusKind::Lsgd;
  if (s == "mgrawa") return ConsensusKind::Mgrawa;
  fail("unknown consensus kind '" + s + "'");
}

const char* consensus_name(ConsensusKind k) {
  switch (k) {
    case ConsensusKind::SimpleAvg: return "simple_avg";
    case ConsensusKind::Easgd: return "easgd";
    case ConsensusKind::Lsgd: return "lsgd";
    case ConsensusKind::Mgrawa: return "mgrawa";
  }
  return "simple_avg";
}

PushMode parse_push_mode(const std::string& s) {
  if (s == "off") return PushMode::Off;
  if (s == "simplified") return PushMode::Simplified;
  if (s == "full_gradient") return PushMode::FullGradient;
  fail("unknown push mode '" + s + "'");
}

const char* push_mode_name(PushMode m) {
  switch (m) {
    case PushMode::Off: return "off";
    case PushMode::Simplified: return "simplified";
    case PushMode::FullGradient: return "full_gradient";
  }
  return "off";
}

LambdaSchedule parse_lambda_schedule(const std::string& s) {
  if (s == "fixed") return LambdaSchedule::Fixed;
  if (s == "cosine_increasing") return LambdaSchedule::CosineIncreasing;
  if (s == "cosine_decreasing") return LambdaSchedule::CosineDecreasing;
  fail("unknown lambda schedule '" + s + "'");
}

const char* lambda_schedule_name(LambdaSchedule s) {
  switch (s) {
    case LambdaSchedule::Fixed: return "fixed";
    case LambdaSchedule::CosineIncreasing: return "cosine_increasing";
    case LambdaSchedule::CosineDecreasing: return "cosine_decreasing";
  }
  return "fixed";
}

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "cosine") return LrSchedule::Cosine;
  fail("unknown lr schedule '" + s + "'");
}

const char* lr_schedule_name(LrSchedule s) {
  switch (s) {
    case LrSchedule::Constant: return "constant";
    case LrSchedule::Cosine: return "cosine";
  }
  return "constant";
}

ObjectiveSpecConfig parse_objective(const json& jo) {
  require_object(jo, "objective");
  ObjectiveSpecConfig spec;
  if (!jo.contains("kind")) fail("objective.kind is required");
  spec.kind = as_string(jo.at("kind"), "objective.kind");
  if (spec.kind == "quadratic") {
    check_keys(jo, "objective",
               {"kind", "dim", "f0", "curvatures", "center", "curvature_min",
                "curvature_max", "curvature_seed"});
    if (jo.contains("f0")) spec.f0 = as_double(jo.at("f0"), "objective.f0");
    if (jo.contains("curvatures")) {
      spec.curvatures = as_vector(jo.at("curvatures"), "objective.curvatures");
      if (spec.curvatures->empty()) fail("objective.curvatures must be non-empty");
      spec.dim = spec.curvatures->size();
      if (jo.contains("dim") &&
          as_int(jo.at("dim"), "objective.dim") !=
              static_cast<long long>(spec.dim)) {
        fail("objective.dim contradicts the curvature list length");
      }
    } else {
      if (jo.contains("dim")) {
        const long long d = as_int(jo.at("dim"), "objective.dim");
        if (d < 1) fail("objective.dim must be >= 1");
        spec.dim = static_cast<std::size_t>(d);
      }
      if (jo.contains("curvature_min")) {
        spec.curvature_min = as_double(jo.at("curvature_min"), "objective.curvature_min");
      }
      if (jo.contains("curvature_max")) {
        spec.curvature_max = as_double(jo.at("curvature_max"), "objective.curvature_max");
      }
      if (jo.contains("curvature_seed")) {
        spec.curvature_seed = as_u64(jo.at("curvature_seed"), "objective.curvature_seed");
      }
    }
    if (jo.contains("center")) {
      spec.center = as_vector(jo.at("center"), "objective.center");
      if (spec.center->size() != spec.dim) {
        fail("objective.center length must equal the dimension");
      }
    }
  } else if (spec.kind == "multi_basin") {
    check_keys(jo, "objective", {"kind", "temperature", "basins"});
    if (jo.contains("temperature")) {
      spec.temperature = as_double(jo.at("temperature"), "objective.temperature");
    }
    if (!jo.contains("basins")) fail("objective.basins is required for multi_basin");
    const json& jb = jo.at("basins");
    if (!jb.is_array() || jb.empty()) {
      fail("objective.basins must be a non-empty array");
    }
    for (std::size_t i = 0; i < jb.size(); ++i) {
      const std::string where = "objective.basins[" + std::to_string(i) + "]";
      require_object(jb[i], where);
      check_keys(jb[i], where, {"center", "width", "weight"});
      ObjectiveSpecConfig::BasinConfig basin;
      if (!jb[i].contains("center")) fail(where + ".center is required");
      basin.center = as_vector(jb[i].at("center"), where + ".center");
      if (jb[i].contains("width")) basin.width = as_double(jb[i].at("width"), where + ".width");
      if (jb[i].contains("weight")) {
        basin.weight = as_double(jb[i].at("weight"), where + ".weight");
      }
      spec.basins.push_back(std::move(basin));
    }
  } else if (spec.kind == "mlp") {
    check_keys(jo, "objective",
               {"kind", "in_dim", "hidden", "num_classes", "n_train", "n_test",
                "blob_spread", "blob_noise", "num_shards", "batch_size", "data_seed"});
    MlpSpec& m = spec.mlp;
    auto geti = [&](const char* key, int cur) {
      return jo.contains(key)
                 ? static_cast<int>(as_int(jo.at(key), std::string("objective.") + key))
                 : cur;
    };
    m.in_dim = geti("in_dim", m.in_dim);
    m.hidden = geti("hidden", m.hidden);
    m.num_classes = geti("num_classes", m.num_classes);
    m.n_train = geti("n_train", m.n_train);
    m.n_test = geti("n_test", m.n_test);
    m.num_shards = geti("num_shards", m.num_shards);
    m.batch_size = geti("batch_size", m.batch_size);
    if (jo.contains("blob_spread")) {
      m.blob_spread = as_double(jo.at("blob_spread"), "objective.blob_spread");
    }
    if (jo.contains("blob_noise")) {
      m.blob_noise = as_double(jo.at("blob_noise"), "objective.blob_noise");
    }
    if (jo.contains("data_seed")) {
      m.data_seed = as_u64(jo.at("data_seed"), "objective.data_seed");
    }
  } else {
    fail("unknown objective kind '" + spec.kind + "'");
  }
  return spec;
}

ExperimentConfig from_json(const json& root) {
  require_object(root, "config");
  check_keys(root, "config",
             {"objective", "workers", "pullpush", "local_opt", "noise", "init",
              "total_iters", "seed", "threads", "output_dir", "code_version"});
  ExperimentConfig cfg;
  if (!root.contains("objective")) fail("config.objective is required");
  cfg.objective = parse_objective(root.at("objective"));

  if (root.contains("workers")) {
    const long long w = as_int(root.at("workers"), "workers");
    if (w < 1) fail("workers must be >= 1");
    cfg.workers = static_cast<int>(w);
  }
  if (root.contains("pullpush")) {
    const json& jp = require_object(root.at("pullpush"), "pullpush");
    check_keys(jp, "pullpush",
               {"alpha", "lambda", "tau", "consensus", "push_mode", "lambda_schedule",
                "qsr", "average_momentum"});
    if (jp.contains("alpha")) cfg.pull_push.alpha = as_double(jp.at("alpha"), "pullpush.alpha");
    if (jp.contains("lambda")) {
      cfg.pull_push.lambda = as_double(jp.at("lambda"), "pullpush.lambda");
    }
    if (jp.contains("tau") && jp.contains("qsr")) {
      fail("pullpush.tau and pullpush.qsr are mutually exclusive");
    }
    if (jp.contains("tau")) cfg.pull_push.tau = as_int(jp.at("tau"), "pullpush.tau");
    if (jp.contains("qsr")) {
      const json& jq = require_object(jp.at("qsr"), "pullpush.qsr");
      check_keys(jq, "pullpush.qsr", {"tau_base", "beta"});
      QsrConfig qsr;
      if (jq.contains("tau_base")) {
        qsr.tau_base = as_int(jq.at("tau_base"), "pullpush.qsr.tau_base");
      }
      if (jq.contains("beta")) qsr.beta = as_double(jq.at("beta"), "pullpush.qsr.beta");
      cfg.pull_push.qsr = qsr;
    }
    if (jp.contains("consensus")) {
      cfg.pull_push.consensus_kind =
          parse_consensus(as_string(jp.at("consensus"), "pullpush.consensus"));
    }
    if (jp.contains("push_mode")) {
      cfg.pull_push.push_mode =
          parse_push_mode(as_string(jp.at("push_mode"), "pullpush.push_mode"));
    }
    if (jp.contains("lambda_schedule")) {
      cfg.pull_push.lambda_schedule = parse_lambda_schedule(
          as_string(jp.at("lambda_schedule"), "pullpush.lambda_schedule"));
    }
    if (jp.contains("average_momentum")) {
      cfg.trainer_flags.average_momentum =
          as_bool(jp.at("average_momentum"), "pullpush.average_momentum");
    }
  }
  if (root.contains("local_opt")) {
    const json& jl = require_object(root.at("local_opt"), "local_opt");
    check_keys(jl, "local_opt",
               {"eta", "lr_schedule", "momentum", "weight_decay", "sam_rho"});
    if (jl.contains("eta")) cfg.local_opt.eta = as_double(jl.at("eta"), "local_opt.eta");
    if (jl.contains("lr_schedule")) {
      cfg.local_opt.lr_schedule =
          parse_lr_schedule(as_string(jl.at("lr_schedule"), "local_opt.lr_schedule"));
    }
    if (jl.contains("momentum")) {
      cfg.local_opt.momentum = as_double(jl.at("momentum"), "local_opt.momentum");
    }
    if (jl.contains("weight_decay")) {
      cfg.local_opt.weight_decay = as_double(jl.at("weight_decay"), "local_opt.weight_decay");
    }
    if (jl.contains("sam_rho")) {
      cfg.local_opt.sam_rho = as_double(jl.at("sam_rho"), "local_opt.sam_rho");
    }
  }
  if (root.contains("noise")) {
    const json& jn = require_object(root.at("noise"), "noise");
    check_keys(jn, "noise", {"sigma0"});
    if (jn.contains("sigma0")) cfg.noise.sigma0 = as_double(jn.at("sigma0"), "noise.sigma0");
  }
  if (root.contains("init")) {
    const json& ji = require_object(root.at("init"), "init");
    check_keys(ji, "init", {"independent", "scale", "center"});
    if (ji.contains("independent")) {
      cfg.trainer_flags.independent_init = as_bool(ji.at("independent"), "init.independent");
    }
    if (ji.contains("scale")) {
      cfg.trainer_flags.init_scale = as_double(ji.at("scale"), "init.scale");
    }
    if (ji.contains("center")) {
      cfg.trainer_flags.init_center = as_vector(ji.at("center"), "init.center");
    }
  }
  if (root.contains("total_iters")) {
    cfg.total_iters = as_int(root.at("total_iters"), "total_iters");
    if (cfg.total_iters < 1) fail("total_iters must be >= 1");
  }
  if (root.contains("seed")) cfg.seed = as_u64(root.at("seed"), "seed");
  if (root.contains("threads")) {
    const long long t = as_int(root.at("threads"), "threads");
    if (t < 1) fail("threads must be >= 1");
    cfg.threads = static_cast<int>(t);
  }
  if (root.contains("output_dir")) {
    cfg.output_dir = as_string(root.at("output_dir"), "output_dir");
    if (cfg.output_dir.empty()) fail("output_dir must be non-empty");
  }

  try {
    cfg.pull_push.validate();
    cfg.local_opt.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (!(cfg.noise.sigma0 >= 0.0)) fail("noise.sigma0 must be >= 0");
  return cfg;
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail("override must look like section.key=value, got '" + spec + "'");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare word: treat as a string

  json* cur = &root;
  std::size_t start = 0;
  try {
    while (true) {
      const auto dotpos = path.find('.', start);
      const std::string key = path.substr(start, dotpos - start);
      if (key.empty()) fail("override path has an empty segment: '" + path + "'");
      if (dotpos == std::string::npos) {
        (*cur)[key] = value;
        break;
      }
      cur = &((*cur)[key]);
      start = dotpos + 1;
    }
  } catch (const json::exception& e) {
    fail("cannot apply override '" + spec + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::vector<std::string>& overrides) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded()) fail("config is not valid JSON");
  for (const auto& o : overrides) apply_override(root, o);
  return from_json(root);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) fail("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_experiment_config(buf.str(), overrides);
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json jo;
  jo["kind"] = cfg.objective.kind;
  if (cfg.objective.kind == "quadratic") {
    jo["dim"] = cfg.objective.dim;
    jo["f0"] = cfg.objective.f0;
    if (cfg.objective.curvatures) {
      jo["curvatures"] = *cfg.objective.curvatures;
    } else {
      jo["curvature_min"] = cfg.objective.curvature_min;
      jo["curvature_max"] = cfg.objective.curvature_max;
      jo["curvature_seed"] = cfg.objective.curvature_seed;
    }
    if (cfg.objective.center) jo["center"] = *cfg.objective.center;
  } else if (cfg.objective.kind == "multi_basin") {
    jo["temperature"] = cfg.objective.temperature;
    json basins = json::array();
    for (const auto& b : cfg.objective.basins) {
      basins.push_back({{"center", b.center}, {"width", b.width}, {"weight", b.weight}});
    }
    jo["basins"] = basins;
  } else if (cfg.objective.kind == "mlp") {
    const MlpSpec& m = cfg.objective.mlp;
    jo["in_dim"] = m.in_dim;
    jo["hidden"] = m.hidden;
    jo["num_classes"] = m.num_classes;
    jo["n_train"] = m.n_train;
    jo["n_test"] = m.n_test;
    jo["blob_spread"] = m.blob_spread;
    jo["blob_noise"] = m.blob_noise;
    jo["num_shards"] = m.num_shards;
    jo["batch_size"] = m.batch_size;
    jo["data_seed"] = m.data_seed;
  }

  json jp;
  jp["alpha"] = cfg.pull_push.alpha;
  jp["lambda"] = cfg.pull_push.lambda;
  if (cfg.pull_push.qsr) {
    jp["qsr"] = {{"tau_base", cfg.pull_push.qsr->tau_base},
                 {"beta", cfg.pull_push.qsr->beta}};
  } else {
    jp["tau"] = cfg.pull_push.tau;
  }
  jp["consensus"] = consensus_name(cfg.pull_push.consensus_kind);
  jp["push_mode"] = push_mode_name(cfg.pull_push.push_mode);
  jp["lambda_schedule"] = lambda_schedule_name(cfg.pull_push.lambda_schedule);
  jp["average_momentum"] = cfg.trainer_flags.average_momentum;

  json jl;
  jl["eta"] = cfg.local_opt.eta;
  jl["lr_schedule"] = lr_schedule_name(cfg.local_opt.lr_schedule);
  jl["momentum"] = cfg.local_opt.momentum;
  jl["weight_decay"] = cfg.local_opt.weight_decay;
  if (cfg.local_opt.sam_rho) jl["sam_rho"] = *cfg.local_opt.sam_rho;

  json ji;
  ji["independent"] = cfg.trainer_flags.independent_init;
  ji["scale"] = cfg.trainer_flags.init_scale;
  if (cfg.trainer_flags.init_center) ji["center"] = *cfg.trainer_flags.init_center;

  json root;
  root["objective"] = jo;
  root["workers"] = cfg.workers;
  root["pullpush"] = jp;
  root["local_opt"] = jl;
  root["noise"] = {{"sigma0", cfg.noise.sigma0}};
  root["init"] = ji;
  root["total_iters"] = cfg.total_iters;
  root["seed"] = cfg.seed;
  if (cfg.threads) root["threads"] = *cfg.threads;
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

std::unique_ptr<Objective> build_objective(const ObjectiveSpecConfig& spec) {
  try {
    if (spec.kind == "quadratic") {
      ParamVector curvatures;
      if (spec.curvatures) {
        curvatures = *spec.curvatures;
      } else {
        RngStream rng(spec.curvature_seed, kDatasetStream);
        curvatures =
            QuadraticObjective::random(spec.dim, spec.curvature_min, spec.curvature_max,
                                       spec.f0, rng)
                .curvatures();
      }
      ParamVector center =
          spec.center ? *spec.center : ParamVector(curvatures.size(), 0.0);
      return std::make_unique<QuadraticObjective>(std::move(curvatures),
                                                  std::move(center), spec.f0);
    }
    if (spec.kind == "multi_basin") {
      std::vector<MultiBasinObjective::Basin> basins;
      basins.reserve(spec.basins.size());
      for (const auto& b : spec.basins) {
        basins.push_back(MultiBasinObjective::Basin{b.center, b.width, b.weight});
      }
      return std::make_unique<MultiBasinObjective>(std::move(basins), spec.temperature);
    }
    if (spec.kind == "mlp") {
      return std::make_unique<MlpObjective>(spec.mlp);
    }
  } catch (const Error& e) {
    fail("objective spec rejected: " + std::string(e.what()));
  }
  fail("unknown objective kind '" + spec.kind + "'");
}

int resolve_threads(const std::optional<int>& cli_threads, const ExperimentConfig& cfg) {
  if (cli_threads) {
    if (*cli_threads < 1) fail("threads must be >= 1");
    return *cli_threads;
  }
  if (cfg.threads) return *cfg.threads;
  if (const char* env = std::getenv("PPSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      fail("PPSIM_THREADS must be a positive integer");
    }
    return static_cast<int>(v);
  }
  return 1;
}

}  // namespace ppsim
