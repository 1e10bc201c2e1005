// SPDX-License-Identifier: Apache-2.0
#include "l2a/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace l2a {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path.empty() ? message : path + ": " + message);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <typename T>
void get_num(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  out = v.get<T>();
}

void get_bool(const json& obj, const std::string& path, const char* key,
              bool& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
  out = v.get<bool>();
}

void get_string(const json& obj, const std::string& path, const char* key,
                std::string& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  out = v.get<std::string>();
}

SynthSpec parse_synth(const json& j, const std::string& path) {
  check_keys(j, path,
             {"num_classes", "shared_keywords_per_class",
              "source_only_keywords_per_class", "target_only_keywords_per_class",
              "filler_vocab", "min_sentence_len", "max_sentence_len",
              "keyword_prob", "noise", "source_train_size", "target_train_size",
              "target_val_size", "target_test_size"});
  SynthSpec s;
  get_num(j, path, "num_classes", s.num_classes);
  get_num(j, path, "shared_keywords_per_class", s.shared_keywords_per_class);
  get_num(j, path, "source_only_keywords_per_class",
          s.source_only_keywords_per_class);
  get_num(j, path, "target_only_keywords_per_class",
          s.target_only_keywords_per_class);
  get_num(j, path, "filler_vocab", s.filler_vocab);
  get_num(j, path, "min_sentence_len", s.min_sentence_len);
  get_num(j, path, "max_sentence_len", s.max_sentence_len);
  get_num(j, path, "keyword_prob", s.keyword_prob);
  get_num(j, path, "noise", s.noise);
  get_num(j, path, "source_train_size", s.source_train_size);
  get_num(j, path, "target_train_size", s.target_train_size);
  get_num(j, path, "target_val_size", s.target_val_size);
  get_num(j, path, "target_test_size", s.target_test_size);
  return s;
}

ArchConfig parse_arch(const json& j, const std::string& path, ArchConfig base) {
  check_keys(j, path, {"layers", "hidden", "heads", "ffn"});
  get_num(j, path, "layers", base.layers);
  get_num(j, path, "hidden", base.hidden);
  get_num(j, path, "heads", base.heads);
  get_num(j, path, "ffn", base.ffn);
  return base;
}

json synth_to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"shared_keywords_per_class", s.shared_keywords_per_class},
          {"source_only_keywords_per_class", s.source_only_keywords_per_class},
          {"target_only_keywords_per_class", s.target_only_keywords_per_class},
          {"filler_vocab", s.filler_vocab},
          {"min_sentence_len", s.min_sentence_len},
          {"max_sentence_len", s.max_sentence_len},
          {"keyword_prob", s.keyword_prob},
          {"noise", s.noise},
          {"source_train_size", s.source_train_size},
          {"target_train_size", s.target_train_size},
          {"target_val_size", s.target_val_size},
          {"target_test_size", s.target_test_size}};
}

json arch_to_json(const ArchConfig& a) {
  return {{"layers", a.layers}, {"hidden", a.hidden}, {"heads", a.heads},
          {"ffn", a.ffn}};
}

json data_to_json(const DataConfig& d) {
  json j = {{"n_per_class", d.n_per_class},
            {"max_len", d.max_len},
            {"min_freq", d.min_freq}};
  if (d.use_synth) {
    j["synth"] = synth_to_json(d.synth);
  } else {
    j["paths"] = {{"source_train", d.source_train_path},
                  {"target_train", d.target_train_path},
                  {"target_val", d.target_val_path},
                  {"target_test", d.target_test_path}};
  }
  return j;
}

json kd_to_json(const KDConfig& k) {
  return {{"t_kd", k.t_kd}, {"use_att", k.use_att}, {"use_hidden", k.use_hidden},
          {"use_dark", k.use_dark}};
}

json sampler_to_json(const SamplerConfig& s) {
  return {{"alpha", s.alpha}, {"temp_T", s.temp_T}, {"n_target", s.n_target},
          {"n_source", s.n_source}};
}

json selector_to_json(const SelectorConfig& s) {
  return {{"gamma", s.gamma}, {"lr", s.lr}, {"hidden", s.hidden}};
}

json train_to_json(const TrainSettings& t) {
  return {{"batch_size", t.batch_size},
          {"teacher_lr", t.teacher_lr},
          {"teacher_epochs", t.teacher_epochs},
          {"student_lr", t.student_lr},
          {"student_ft_epochs", t.student_ft_epochs},
          {"generator_lr", t.generator_lr},
          {"generator_pretrain_epochs", t.generator_pretrain_epochs},
          {"mask_rate", t.mask_rate},
          {"distill_epochs", t.distill_epochs}};
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  if (output_dir.empty()) throw ConfigError("output_dir: must be non-empty");
  if (data.max_len < 3) throw ConfigError("data.max_len: must be >= 3");
  if (data.n_per_class < 1) throw ConfigError("data.n_per_class: must be >= 1");
  if (data.min_freq < 1) throw ConfigError("data.min_freq: must be >= 1");
  if (!data.use_synth &&
      (data.source_train_path.empty() || data.target_train_path.empty() ||
       data.target_val_path.empty() || data.target_test_path.empty()))
    throw ConfigError("data.paths: all four dataset paths required");
  auto check_arch = [](const ArchConfig& a, const char* name) {
    if (a.layers < 1 || a.hidden < 1 || a.heads < 1 || a.ffn < 1)
      throw ConfigError(std::string(name) + ": all counts must be >= 1");
    if (a.hidden % a.heads != 0)
      throw ConfigError(std::string(name) + ": hidden not divisible by heads");
  };
  check_arch(teacher, "teacher");
  check_arch(student, "student");
  check_arch(generator, "generator");
  // Attention maps pair index-to-index across models.
  if (teacher.heads != student.heads)
    throw ConfigError("student.heads: must equal teacher.heads");
  kd.validate();
  sampler.validate();
  selector.validate();
  if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (train.distill_epochs < 1)
    throw ConfigError("train.distill_epochs: must be >= 1");
  if (!(train.mask_rate > 0.0 && train.mask_rate < 1.0))
    throw ConfigError("train.mask_rate: must be in (0,1)");
  if (!(train.teacher_lr > 0.0 && train.student_lr > 0.0 &&
        train.generator_lr > 0.0))
    throw ConfigError("train: learning rates must be positive");
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "",
             {"task", "output_dir", "seeds", "data", "teacher", "student",
              "generator", "kd", "sampler", "selector", "train", "sweep"});
  RunConfig cfg;
  std::string task = "classification";
  get_string(j, "", "task", task);
  if (task == "classification") cfg.task = TaskKind::classification;
  else if (task == "regression") cfg.task = TaskKind::regression;
  else fail("task", "expected \"classification\" or \"regression\"");
  get_string(j, "", "output_dir", cfg.output_dir);
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array()) fail("seeds", "expected an array");
    cfg.seeds.clear();
    for (const auto& s : j["seeds"]) {
      if (!s.is_number_unsigned()) fail("seeds", "expected unsigned integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data",
               {"synth", "paths", "n_per_class", "max_len", "min_freq"});
    if (d.contains("synth") && d.contains("paths"))
      fail("data", "specify either synth or paths, not both");
    if (d.contains("synth")) {
      cfg.data.use_synth = true;
      cfg.data.synth = parse_synth(d["synth"], "data.synth");
    } else if (d.contains("paths")) {
      cfg.data.use_synth = false;
      const json& p = d["paths"];
      check_keys(p, "data.paths",
                 {"source_train", "target_train", "target_val", "target_test"});
      get_string(p, "data.paths", "source_train", cfg.data.source_train_path);
      get_string(p, "data.paths", "target_train", cfg.data.target_train_path);
      get_string(p, "data.paths", "target_val", cfg.data.target_val_path);
      get_string(p, "data.paths", "target_test", cfg.data.target_test_path);
    }
    get_num(d, "data", "n_per_class", cfg.data.n_per_class);
    get_num(d, "data", "max_len", cfg.data.max_len);
    get_num(d, "data", "min_freq", cfg.data.min_freq);
  }
  if (j.contains("teacher"))
    cfg.teacher = parse_arch(j["teacher"], "teacher", cfg.teacher);
  if (j.contains("student"))
    cfg.student = parse_arch(j["student"], "student", cfg.student);
  if (j.contains("generator"))
    cfg.generator = parse_arch(j["generator"], "generator", cfg.generator);
  if (j.contains("kd")) {
    const json& k = j["kd"];
    check_keys(k, "kd", {"t_kd", "use_att", "use_hidden", "use_dark"});
    get_num(k, "kd", "t_kd", cfg.kd.t_kd);
    get_bool(k, "kd", "use_att", cfg.kd.use_att);
    get_bool(k, "kd", "use_hidden", cfg.kd.use_hidden);
    get_bool(k, "kd", "use_dark", cfg.kd.use_dark);
  }
  cfg.kd.task = cfg.task;
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    check_keys(s, "sampler", {"alpha", "temp_T", "n_target", "n_source"});
    get_num(s, "sampler", "alpha", cfg.sampler.alpha);
    get_num(s, "sampler", "temp_T", cfg.sampler.temp_T);
    get_num(s, "sampler", "n_target", cfg.sampler.n_target);
    get_num(s, "sampler", "n_source", cfg.sampler.n_source);
  }
  if (j.contains("selector")) {
    const json& s = j["selector"];
    check_keys(s, "selector", {"gamma", "lr", "hidden"});
    get_num(s, "selector", "gamma", cfg.selector.gamma);
    get_num(s, "selector", "lr", cfg.selector.lr);
    get_num(s, "selector", "hidden", cfg.selector.hidden);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train",
               {"batch_size", "teacher_lr", "teacher_epochs", "student_lr",
                "student_ft_epochs", "generator_lr",
                "generator_pretrain_epochs", "mask_rate", "distill_epochs"});
    get_num(t, "train", "batch_size", cfg.train.batch_size);
    get_num(t, "train", "teacher_lr", cfg.train.teacher_lr);
    get_num(t, "train", "teacher_epochs", cfg.train.teacher_epochs);
    get_num(t, "train", "student_lr", cfg.train.student_lr);
    get_num(t, "train", "student_ft_epochs", cfg.train.student_ft_epochs);
    get_num(t, "train", "generator_lr", cfg.train.generator_lr);
    get_num(t, "train", "generator_pretrain_epochs",
            cfg.train.generator_pretrain_epochs);
    get_num(t, "train", "mask_rate", cfg.train.mask_rate);
    get_num(t, "train", "distill_epochs", cfg.train.distill_epochs);
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"n_per_class", "alpha", "temp_T"});
    auto get_list = [&](const char* key, auto& out) {
      if (!s.contains(key)) return;
      if (!s[key].is_array()) fail(std::string("sweep.") + key, "expected an array");
      for (const auto& v : s[key]) {
        if (!v.is_number()) fail(std::string("sweep.") + key, "expected numbers");
        out.push_back(v.get<typename std::decay_t<decltype(out)>::value_type>());
      }
    };
    get_list("n_per_class", cfg.sweep.n_per_class);
    get_list("alpha", cfg.sweep.alpha);
    get_list("temp_T", cfg.sweep.temp_T);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["task"] = cfg.task == TaskKind::classification ? "classification" : "regression";
  j["output_dir"] = cfg.output_dir;
  j["seeds"] = cfg.seeds;
  j["data"] = data_to_json(cfg.data);
  j["teacher"] = arch_to_json(cfg.teacher);
  j["student"] = arch_to_json(cfg.student);
  j["generator"] = arch_to_json(cfg.generator);
  j["kd"] = kd_to_json(cfg.kd);
  j["sampler"] = sampler_to_json(cfg.sampler);
  j["selector"] = selector_to_json(cfg.selector);
  j["train"] = train_to_json(cfg.train);
  if (!cfg.sweep.empty()) {
    json s;
    if (!cfg.sweep.n_per_class.empty()) s["n_per_class"] = cfg.sweep.n_per_class;
    if (!cfg.sweep.alpha.empty()) s["alpha"] = cfg.sweep.alpha;
    if (!cfg.sweep.temp_T.empty()) s["temp_T"] = cfg.sweep.temp_T;
    j["sweep"] = s;
  }
  return j;
}

std::string json_hash(const json& j) {
  // FNV-1a 64 over the canonical dump (nlohmann objects iterate sorted).
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string stage_hash(const RunConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["task"] = cfg.task == TaskKind::classification ? "classification" : "regression";
  if (command == "synth-data") {
    if (!cfg.data.use_synth)
      throw ConfigError("synth-data requires a data.synth specification");
    j["synth"] = synth_to_json(cfg.data.synth);
    return json_hash(j);
  }
  j["data"] = data_to_json(cfg.data);
  if (command == "pretrain-generator") {
    j["generator"] = arch_to_json(cfg.generator);
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"generator_lr", cfg.train.generator_lr},
                  {"generator_pretrain_epochs", cfg.train.generator_pretrain_epochs},
                  {"mask_rate", cfg.train.mask_rate}};
  } else if (command == "train-teacher") {
    j["teacher"] = arch_to_json(cfg.teacher);
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"teacher_lr", cfg.train.teacher_lr},
                  {"teacher_epochs", cfg.train.teacher_epochs}};
  } else if (command == "student-ft") {
    j["student"] = arch_to_json(cfg.student);
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"student_lr", cfg.train.student_lr},
                  {"student_ft_epochs", cfg.train.student_ft_epochs}};
  } else if (command == "distill-noaug") {
    j["teacher"] = arch_to_json(cfg.teacher);
    j["student"] = arch_to_json(cfg.student);
    j["kd"] = kd_to_json(cfg.kd);
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"teacher_lr", cfg.train.teacher_lr},
                  {"teacher_epochs", cfg.train.teacher_epochs},
                  {"student_lr", cfg.train.student_lr},
                  {"distill_epochs", cfg.train.distill_epochs}};
  } else if (command == "distill") {
    j["teacher"] = arch_to_json(cfg.teacher);
    j["student"] = arch_to_json(cfg.student);
    j["generator"] = arch_to_json(cfg.generator);
    j["kd"] = kd_to_json(cfg.kd);
    j["sampler"] = sampler_to_json(cfg.sampler);
    j["train"] = train_to_json(cfg.train);
  } else if (command == "distill-l2a" || command == "evaluate" ||
             command == "sweep") {
    j["teacher"] = arch_to_json(cfg.teacher);
    j["student"] = arch_to_json(cfg.student);
    j["generator"] = arch_to_json(cfg.generator);
    j["kd"] = kd_to_json(cfg.kd);
    j["sampler"] = sampler_to_json(cfg.sampler);
    j["selector"] = selector_to_json(cfg.selector);
    j["train"] = train_to_json(cfg.train);
    if (command == "sweep") {
      json s;
      s["n_per_class"] = cfg.sweep.n_per_class;
      s["alpha"] = cfg.sweep.alpha;
      s["temp_T"] = cfg.sweep.temp_T;
      j["sweep"] = s;
    }
  } else {
    throw ConfigError("unknown command for hashing: " + command);
  }
  return json_hash(j);
}

std::string artifact_dir(const RunConfig& cfg, const std::string& command,
                         std::uint64_t seed, bool create) {
  // --no-aug shares the "distill" directory; the hash separates variants.
  const std::string dir_name = command == "distill-noaug" ? "distill" : command;
  const std::string path = cfg.output_dir + "/" + dir_name + "/" +
                           stage_hash(cfg, command) + "/" + std::to_string(seed);
  if (create) std::filesystem::create_directories(path);
  return path;
}

}  // namespace l2a
