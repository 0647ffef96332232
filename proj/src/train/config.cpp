#include "dpr/train/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dpr/error.hpp"

namespace dpr {

std::string to_string(PretrainParadigm p) {
  return p == PretrainParadigm::bottleneck ? "bottleneck" : "contrastive";
}

PretrainParadigm paradigm_from_string(const std::string& s) {
  if (s == "bottleneck") return PretrainParadigm::bottleneck;
  if (s == "contrastive") return PretrainParadigm::contrastive;
  throw DataError("unknown paradigm '" + s + "' (expected bottleneck or contrastive)");
}

std::string to_string(ContextSource c) {
  switch (c) {
    case ContextSource::coarse_span: return "span";
    case ContextSource::passage_self: return "self";
    case ContextSource::expanded_queries: return "expanded";
  }
  return "span";
}

ContextSource context_from_string(const std::string& s) {
  if (s == "span") return ContextSource::coarse_span;
  if (s == "self") return ContextSource::passage_self;
  if (s == "expanded") return ContextSource::expanded_queries;
  throw DataError("unknown context source '" + s + "' (expected span, self or expanded)");
}

long CurriculumPlan::boundary_step(long total_steps) const {
  return static_cast<long>(std::ceil(stage1_fraction * static_cast<double>(total_steps)));
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text, const char* what) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t a = line.find_first_not_of(" \t");
    if (a == std::string::npos || line[a] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(std::string(what) + ": line " + std::to_string(line_no) +
                      " is not 'key = value'");
    auto trim = [](std::string s) {
      std::size_t x = s.find_first_not_of(" \t");
      if (x == std::string::npos) return std::string();
      std::size_t y = s.find_last_not_of(" \t");
      return s.substr(x, y - x + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct KvReader {
  KvMap kv;
  const char* what;
  std::string take(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string(what) + ": missing key '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  }
  long take_long(const std::string& key) { return std::stol(take(key)); }
  double take_double(const std::string& key) { return std::stod(take(key)); }
  bool take_bool(const std::string& key) { return take(key) != "0"; }
  void finish() const {
    if (!kv.empty())
      throw DataError(std::string(what) + ": unknown key '" + kv.begin()->first + "'");
  }
};

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "paradigm = " << to_string(paradigm) << "\n"
     << "total_steps = " << total_steps << "\n"
     << "batch_size = " << batch_size << "\n"
     << "grad_accum = " << grad_accum << "\n"
     << "peak_lr = " << fmt_double(peak_lr) << "\n"
     << "warmup_ratio = " << fmt_double(warmup_ratio) << "\n"
     << "mask_ratio = " << fmt_double(mask_ratio) << "\n"
     << "seed = " << seed << "\n"
     << "schedule_mode = " << (use_curriculum ? "curriculum" : "single") << "\n"
     << "stage1_fraction = " << fmt_double(curriculum.stage1_fraction) << "\n"
     << "stage1_context = " << to_string(curriculum.stage1_context) << "\n"
     << "stage2_lr = " << fmt_double(curriculum.stage2_lr) << "\n"
     << "single_context = " << to_string(single_context) << "\n"
     << "span_lo = " << span_lo << "\n"
     << "span_hi = " << span_hi << "\n"
     << "infonce_symmetric = " << (infonce_symmetric ? 1 : 0) << "\n"
     << "precision = " << precision << "\n"
     << "n_layers = " << model.n_layers << "\n"
     << "n_heads = " << model.n_heads << "\n"
     << "d_model = " << model.d_model << "\n"
     << "d_ff = " << model.d_ff << "\n"
     << "vocab_size = " << model.vocab_size << "\n"
     << "max_seq_len = " << model.max_seq_len << "\n"
     << "aux_tap_layer = " << model.aux_tap_layer << "\n"
     << "n_aux_layers = " << model.n_aux_layers << "\n"
     << "untied_towers = " << (model.untied_towers ? 1 : 0) << "\n";
  return os.str();
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
  KvReader r{parse_kv(text, "train config"), "train config"};
  TrainConfig c;
  c.paradigm = paradigm_from_string(r.take("paradigm"));
  c.total_steps = r.take_long("total_steps");
  c.batch_size = static_cast<Index>(r.take_long("batch_size"));
  c.grad_accum = static_cast<int>(r.take_long("grad_accum"));
  c.peak_lr = r.take_double("peak_lr");
  c.warmup_ratio = r.take_double("warmup_ratio");
  c.mask_ratio = r.take_double("mask_ratio");
  c.seed = static_cast<std::uint64_t>(r.take_long("seed"));
  c.use_curriculum = r.take("schedule_mode") == "curriculum";
  c.curriculum.stage1_fraction = r.take_double("stage1_fraction");
  c.curriculum.stage1_context = context_from_string(r.take("stage1_context"));
  c.curriculum.stage2_lr = r.take_double("stage2_lr");
  c.single_context = context_from_string(r.take("single_context"));
  c.span_lo = static_cast<Index>(r.take_long("span_lo"));
  c.span_hi = static_cast<Index>(r.take_long("span_hi"));
  c.infonce_symmetric = r.take_bool("infonce_symmetric");
  c.precision = r.take("precision");
  c.model.n_layers = static_cast<int>(r.take_long("n_layers"));
  c.model.n_heads = static_cast<int>(r.take_long("n_heads"));
  c.model.d_model = static_cast<Index>(r.take_long("d_model"));
  c.model.d_ff = static_cast<Index>(r.take_long("d_ff"));
  c.model.vocab_size = static_cast<int>(r.take_long("vocab_size"));
  c.model.max_seq_len = static_cast<Index>(r.take_long("max_seq_len"));
  c.model.aux_tap_layer = static_cast<int>(r.take_long("aux_tap_layer"));
  c.model.n_aux_layers = static_cast<int>(r.take_long("n_aux_layers"));
  c.model.untied_towers = r.take_bool("untied_towers");
  r.finish();
  return c;
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("train config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("train config: cannot write " + path);
  out << to_text();
}

TrainConfig TrainConfig::full_scale_profile(PretrainParadigm p) {
  TrainConfig c;
  c.paradigm = p;
  c.batch_size = 2048;
  c.grad_accum = 1;
  c.warmup_ratio = 0.1;
  c.seed = 42;
  if (p == PretrainParadigm::bottleneck) {
    c.peak_lr = 3e-4;
    c.total_steps = 80000;
  } else {
    c.peak_lr = 1e-4;
    c.total_steps = 120000;
  }
  c.model.n_layers = 12;
  c.model.n_heads = 12;
  c.model.d_model = 768;
  c.model.d_ff = 3072;
  c.model.max_seq_len = 128;
  return c;
}

std::string FinetuneConfig::to_text() const {
  std::ostringstream os;
  os << "total_steps = " << total_steps << "\n"
     << "batch_size = " << batch_size << "\n"
     << "grad_accum = " << grad_accum << "\n"
     << "lr = " << fmt_double(lr) << "\n"
     << "negatives_per_query = " << negatives_per_query << "\n"
     << "seed = " << seed << "\n"
     << "precision = " << precision << "\n";
  return os.str();
}

FinetuneConfig FinetuneConfig::parse_text(const std::string& text) {
  KvReader r{parse_kv(text, "finetune config"), "finetune config"};
  FinetuneConfig c;
  c.total_steps = r.take_long("total_steps");
  c.batch_size = static_cast<Index>(r.take_long("batch_size"));
  c.grad_accum = static_cast<int>(r.take_long("grad_accum"));
  c.lr = r.take_double("lr");
  c.negatives_per_query = static_cast<int>(r.take_long("negatives_per_query"));
  c.seed = static_cast<std::uint64_t>(r.take_long("seed"));
  c.precision = r.take("precision");
  r.finish();
  return c;
}

FinetuneConfig FinetuneConfig::full_scale_profile() {
  FinetuneConfig c;
  c.lr = 2e-5;
  c.batch_size = 8;
  c.negatives_per_query = 15;
  return c;
}

}  // namespace dpr
