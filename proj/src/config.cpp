#include "ifx/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <sstream>

namespace ifx {

namespace {

template <class T>
T parse_int(std::string_view key, std::string_view v) {
  v = trim(v);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error("config " + std::string(key) + ": expected an integer, got '" + std::string(v) +
                "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw Error("config " + std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw Error("config " + std::string(key) + ": expected a number, got '" + std::string(v) +
                "'");
  }
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

template <class T>
Setter int_field(T RunConfig::*group, std::int64_t T::*field) {
  return [=](RunConfig& c, auto k, auto v) { (c.*group).*field = parse_int<std::int64_t>(k, v); };
}

template <class T>
Setter seed_field(T RunConfig::*group, std::uint64_t T::*field) {
  return [=](RunConfig& c, auto k, auto v) { (c.*group).*field = parse_int<std::uint64_t>(k, v); };
}

template <class T>
Setter real_field(T RunConfig::*group, double T::*field) {
  return [=](RunConfig& c, auto k, auto v) { (c.*group).*field = parse_real(k, v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"run.profile", [](RunConfig& c, auto, auto v) { c.profile = std::string(trim(v)); }},
      {"paths.registry", [](RunConfig& c, auto, auto v) { c.registry = std::string(trim(v)); }},
      {"paths.corpus_dir", [](RunConfig& c, auto, auto v) { c.corpus_dir = std::string(trim(v)); }},
      {"paths.output_dir", [](RunConfig& c, auto, auto v) { c.output_dir = std::string(trim(v)); }},
      {"data.sentences", int_field(&RunConfig::data, &DataConfig::sentences)},
      {"data.eval_sentences", int_field(&RunConfig::data, &DataConfig::eval_sentences)},
      {"data.split_seed", seed_field(&RunConfig::data, &DataConfig::split_seed)},
      {"data.tokenizer_vocab", int_field(&RunConfig::data, &DataConfig::tokenizer_vocab)},
      {"data.byte_fallback",
       [](RunConfig& c, auto k, auto v) { c.data.byte_fallback = parse_bool(k, v); }},
      {"data.mask_seed", seed_field(&RunConfig::data, &DataConfig::mask_seed)},
      {"data.parallel_sentences", int_field(&RunConfig::data, &DataConfig::parallel_sentences)},
      {"model.n_layers", int_field(&RunConfig::model, &ModelConfig::n_layers)},
      {"model.d_model", int_field(&RunConfig::model, &ModelConfig::d_model)},
      {"model.n_heads", int_field(&RunConfig::model, &ModelConfig::n_heads)},
      {"model.d_ffn", int_field(&RunConfig::model, &ModelConfig::d_ffn)},
      {"model.max_len", int_field(&RunConfig::model, &ModelConfig::max_len)},
      {"train.total_steps", int_field(&RunConfig::train, &TrainConfig::total_steps)},
      {"train.warmup_steps", int_field(&RunConfig::train, &TrainConfig::warmup_steps)},
      {"train.peak_lr", real_field(&RunConfig::train, &TrainConfig::peak_lr)},
      {"train.batch_size", int_field(&RunConfig::train, &TrainConfig::batch_size)},
      {"train.mask_ratio", real_field(&RunConfig::train, &TrainConfig::mask_ratio)},
      {"train.adam_beta1", real_field(&RunConfig::train, &TrainConfig::adam_beta1)},
      {"train.adam_beta2", real_field(&RunConfig::train, &TrainConfig::adam_beta2)},
      {"train.adam_eps", real_field(&RunConfig::train, &TrainConfig::adam_eps)},
      {"train.weight_decay", real_field(&RunConfig::train, &TrainConfig::weight_decay)},
      {"train.grad_clip_norm",
       [](RunConfig& c, auto k, auto v) {
         if (trim(v) == "none" || trim(v) == "off") {
           c.train.grad_clip_norm.reset();
         } else {
           c.train.grad_clip_norm = parse_real(k, v);
         }
       }},
      {"sweep.workers",
       [](RunConfig& c, auto k, auto v) { c.sweep.workers = parse_int<std::size_t>(k, v); }},
      {"sweep.global_seed", seed_field(&RunConfig::sweep, &SweepSettings::global_seed)},
      {"analysis.min_group_size",
       [](RunConfig& c, auto k, auto v) {
         c.analysis.min_group_size = parse_int<std::size_t>(k, v);
       }},
      {"analysis.exclude_outliers",
       [](RunConfig& c, auto k, auto v) { c.analysis.exclude_outliers = parse_bool(k, v); }},
      {"probe.target", [](RunConfig& c, auto, auto v) { c.probe.target = std::string(trim(v)); }},
      {"probe.low_partners", int_field(&RunConfig::probe, &ProbeSettings::low_partners)},
      {"probe.high_partners", int_field(&RunConfig::probe, &ProbeSettings::high_partners)},
      {"probe.seeds", int_field(&RunConfig::probe, &ProbeSettings::seeds)},
      {"probe.classes",
       [](RunConfig& c, auto k, auto v) { c.probe.task.classes = parse_int<int>(k, v); }},
      {"probe.per_class",
       [](RunConfig& c, auto k, auto v) { c.probe.task.per_class = parse_int<int>(k, v); }},
      {"probe.tilt", [](RunConfig& c, auto k, auto v) { c.probe.task.tilt = parse_real(k, v); }},
      {"probe.task_seed",
       [](RunConfig& c, auto k, auto v) { c.probe.task.seed = parse_int<std::uint64_t>(k, v); }},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::preset(std::string_view profile) {
  RunConfig c;
  c.profile = std::string(profile);
  c.model.n_layers = 2;
  c.train.peak_lr = 1e-3;
  c.train.weight_decay = 0.01;
  if (profile == "desk") {
    c.model.d_model = 128;
    c.model.n_heads = 4;
    c.model.d_ffn = 512;
    c.model.max_len = 64;
    c.train.total_steps = 600;
    c.train.warmup_steps = 150;
    c.train.batch_size = 32;
  } else if (profile == "tiny") {
    c.model.d_model = 32;
    c.model.n_heads = 2;
    c.model.d_ffn = 64;
    c.model.max_len = 32;
    c.train.total_steps = 300;
    c.train.warmup_steps = 75;
    c.train.batch_size = 16;
  } else {
    throw Error("unknown profile '" + std::string(profile) + "' (expected desk or tiny)");
  }
  return c;
}

void RunConfig::set(std::string_view dotted_key, std::string_view value) {
  const auto& table = setters();
  auto it = table.find(dotted_key);
  if (it == table.end()) throw Error("unknown config key: " + std::string(dotted_key));
  it->second(*this, dotted_key, value);
}

void RunConfig::validate() const {
  ModelConfig m = model;
  m.vocab_size = std::max<std::int64_t>(data.tokenizer_vocab, 1);
  m.validate();
  train.validate();
  if (data.sentences <= data.eval_sentences || data.eval_sentences <= 0) {
    throw Error("config: need 0 < data.eval_sentences < data.sentences");
  }
  if (data.tokenizer_vocab <= kNumSpecial) throw Error("config: data.tokenizer_vocab too small");
  if (data.parallel_sentences <= 0) throw Error("config: data.parallel_sentences must be > 0");
  if (sweep.workers == 0) throw Error("config: sweep.workers must be > 0");
  if (probe.seeds <= 0 || probe.low_partners <= 0 || probe.high_partners <= 0) {
    throw Error("config: probe seeds and partner counts must be > 0");
  }
  if (probe.task.classes < 2 || probe.task.per_class < 20) {
    throw Error("config: probe needs >= 2 classes and >= 20 examples per class");
  }
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  std::string profile = "desk";
  if (auto run = tree.get_child_optional("run")) {
    profile = run->get<std::string>("profile", profile);
  }
  RunConfig c = RunConfig::preset(profile);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error("config: key '" + section + "' must be inside a section");
    }
    for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
  }
  for (auto* p : {&c.registry, &c.corpus_dir, &c.output_dir}) {
    if (!p->empty() && p->is_relative()) *p = base_dir / *p;
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto c = parse_run_config(read_file(path), path.parent_path());
  c.validate();
  return c;
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream o;
  auto real = [](double v) { return format_double(v); };
  o << "[run]\nprofile = " << c.profile << "\n\n";
  o << "[paths]\nregistry = " << c.registry.string() << "\ncorpus_dir = " << c.corpus_dir.string()
    << "\noutput_dir = " << c.output_dir.string() << "\n\n";
  o << "[data]\nsentences = " << c.data.sentences << "\neval_sentences = " << c.data.eval_sentences
    << "\nsplit_seed = " << c.data.split_seed << "\ntokenizer_vocab = " << c.data.tokenizer_vocab
    << "\nbyte_fallback = " << (c.data.byte_fallback ? "true" : "false")
    << "\nmask_seed = " << c.data.mask_seed
    << "\nparallel_sentences = " << c.data.parallel_sentences << "\n\n";
  o << "[model]\nn_layers = " << c.model.n_layers << "\nd_model = " << c.model.d_model
    << "\nn_heads = " << c.model.n_heads << "\nd_ffn = " << c.model.d_ffn
    << "\nmax_len = " << c.model.max_len << "\n\n";
  o << "[train]\ntotal_steps = " << c.train.total_steps
    << "\nwarmup_steps = " << c.train.warmup_steps << "\npeak_lr = " << real(c.train.peak_lr)
    << "\nbatch_size = " << c.train.batch_size << "\nmask_ratio = " << real(c.train.mask_ratio)
    << "\nadam_beta1 = " << real(c.train.adam_beta1)
    << "\nadam_beta2 = " << real(c.train.adam_beta2) << "\nadam_eps = " << real(c.train.adam_eps)
    << "\nweight_decay = " << real(c.train.weight_decay) << "\ngrad_clip_norm = "
    << (c.train.grad_clip_norm ? real(*c.train.grad_clip_norm) : std::string("none")) << "\n\n";
  o << "[sweep]\nworkers = " << c.sweep.workers << "\nglobal_seed = " << c.sweep.global_seed
    << "\n\n";
  o << "[analysis]\nmin_group_size = " << c.analysis.min_group_size
    << "\nexclude_outliers = " << (c.analysis.exclude_outliers ? "true" : "false") << "\n\n";
  o << "[probe]\ntarget = " << c.probe.target << "\nlow_partners = " << c.probe.low_partners
    << "\nhigh_partners = " << c.probe.high_partners << "\nseeds = " << c.probe.seeds
    << "\nclasses = " << c.probe.task.classes << "\nper_class = " << c.probe.task.per_class
    << "\ntilt = " << real(c.probe.task.tilt) << "\ntask_seed = " << c.probe.task.seed << "\n";
  return o.str();
}

}  // namespace ifx
