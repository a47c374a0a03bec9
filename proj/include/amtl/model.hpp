#ifndef AMTL_MODEL_HPP
#define AMTL_MODEL_HPP

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amtl/layers.hpp"
#include "amtl/rng.hpp"
#include "amtl/tensor.hpp"

namespace amtl {

// Tasks, 1-based at the API boundary: 1 = humor classification, 2 = humor
// rating, 3 = controversy classification, 4 = offense rating.
inline std::size_t task_index(int task_id) {
  if (task_id < 1 || task_id > 4) {
    throw std::invalid_argument("unknown task id " + std::to_string(task_id) + "; expected 1..4");
  }
  return static_cast<std::size_t>(task_id - 1);
}

struct ModelConfig {
  std::string preset_name = "custom";
  bool adversarial = false;
  bool orthogonality = false;
  bool capsules = true;
  bool t1a_twice = false;
  double lambda = 0.0;
  double gamma = 0.0;
  std::array<double, 4> task_weights{1.0, 1.0, 1.0, 1.0};
  std::size_t hidden_size = 128;
  std::size_t embedding_dim = 32;
  std::size_t vocab_size = 20000;
  std::size_t branch_dim = 64;
  std::size_t max_sequence_length = 64;
  CapsuleStackConfig caps;
  double dropout_rate = 0.5;
  bool dropout_capsules = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(lambda >= 0) || !(gamma >= 0)) throw std::invalid_argument("config: lambda and gamma must be >= 0");
    if (!adversarial && lambda != 0.0) {
      throw std::invalid_argument("config invariant violated: lambda must be 0 whenever adversarial=false (got lambda=" +
                                  std::to_string(lambda) + ")");
    }
    if (!orthogonality && gamma != 0.0) {
      throw std::invalid_argument("config invariant violated: gamma must be 0 whenever orthogonality=false (got gamma=" +
                                  std::to_string(gamma) + ")");
    }
    for (double w : task_weights) {
      if (!(w > 0)) throw std::invalid_argument("config: task weights must be positive");
    }
    if (hidden_size == 0 || embedding_dim == 0 || vocab_size < 2 || branch_dim == 0) {
      throw std::invalid_argument("config: layer sizes must be positive (vocab >= 2)");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("config: dropout rate outside [0,1)");
    if (capsules && max_sequence_length < caps.min_sequence_length()) {
      throw std::invalid_argument("config: max sequence length below capsule minimum " +
                                  std::to_string(caps.min_sequence_length()));
    }
  }

  bool adversarial_active() const { return adversarial && lambda > 0.0; }
  bool orthogonality_active() const { return orthogonality && gamma > 0.0; }

  // Shortest usable token sequence; shorter inputs are right-padded.
  std::size_t min_sequence_length() const { return capsules ? caps.min_sequence_length() : 1; }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"preset_name", c.preset_name},
                     {"adversarial", c.adversarial},
                     {"orthogonality", c.orthogonality},
                     {"capsules", c.capsules},
                     {"t1a_twice", c.t1a_twice},
                     {"lambda", c.lambda},
                     {"gamma", c.gamma},
                     {"task_weights", c.task_weights},
                     {"hidden_size", c.hidden_size},
                     {"embedding_dim", c.embedding_dim},
                     {"vocab_size", c.vocab_size},
                     {"branch_dim", c.branch_dim},
                     {"max_sequence_length", c.max_sequence_length},
                     {"primary_filters", c.caps.primary_filters},
                     {"primary_kernel", c.caps.primary_kernel},
                     {"conv_filters", c.caps.conv_filters},
                     {"conv_kernel", c.caps.conv_kernel},
                     {"capsule_dim", c.caps.capsule_dim},
                     {"routing_iterations", c.caps.routing_iterations},
                     {"dense_caps_out", c.caps.dense_out},
                     {"dropout_rate", c.dropout_rate},
                     {"dropout_capsules", c.dropout_capsules},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("preset_name").get_to(c.preset_name);
  j.at("adversarial").get_to(c.adversarial);
  j.at("orthogonality").get_to(c.orthogonality);
  j.at("capsules").get_to(c.capsules);
  j.at("t1a_twice").get_to(c.t1a_twice);
  j.at("lambda").get_to(c.lambda);
  j.at("gamma").get_to(c.gamma);
  j.at("task_weights").get_to(c.task_weights);
  j.at("hidden_size").get_to(c.hidden_size);
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("branch_dim").get_to(c.branch_dim);
  j.at("max_sequence_length").get_to(c.max_sequence_length);
  j.at("primary_filters").get_to(c.caps.primary_filters);
  j.at("primary_kernel").get_to(c.caps.primary_kernel);
  j.at("conv_filters").get_to(c.caps.conv_filters);
  j.at("conv_kernel").get_to(c.caps.conv_kernel);
  j.at("capsule_dim").get_to(c.caps.capsule_dim);
  j.at("routing_iterations").get_to(c.caps.routing_iterations);
  j.at("dense_caps_out").get_to(c.caps.dense_out);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("dropout_capsules").get_to(c.dropout_capsules);
  j.at("seed").get_to(c.seed);
}

// The seven named training configurations plus their layer sizes.
inline std::vector<std::string> preset_names() {
  return {"MTL-Large", "MTL-Small", "AMTL-LSTM", "AMTL-Adv", "AMTL-Humor-1", "AMTL-Humor-2", "AMTL-T1a-Twice"};
}

inline ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.preset_name = name;
  if (name == "MTL-Large") {
    c.capsules = true;
    c.hidden_size = 512;
    c.caps.primary_filters = 16;
    c.caps.conv_filters = 8;
    c.caps.conv_kernel = 5;
  } else if (name == "MTL-Small") {
    c.capsules = true;
  } else if (name == "AMTL-LSTM") {
    c.adversarial = true;
    c.orthogonality = true;
    c.capsules = false;
    c.lambda = 0.1;
    c.gamma = 0.01;
  } else if (name == "AMTL-Adv") {
    c.adversarial = true;
    c.orthogonality = false;
    c.capsules = true;
    c.lambda = 0.1;
    c.gamma = 0.0;
  } else if (name == "AMTL-Humor-1") {
    c.adversarial = true;
    c.orthogonality = true;
    c.capsules = true;
    c.lambda = 0.1;
    c.gamma = 0.01;
  } else if (name == "AMTL-Humor-2") {
    c.adversarial = true;
    c.orthogonality = true;
    c.capsules = true;
    c.lambda = 0.5;
    c.gamma = 0.1;
  } else if (name == "AMTL-T1a-Twice") {
    c.adversarial = true;
    c.orthogonality = true;
    c.capsules = true;
    c.t1a_twice = true;
    c.lambda = 0.05;
    c.gamma = 0.01;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "'; available: " + known);
  }
  c.validate();
  return c;
}

struct Prediction {
  double task1a_prob = 0.5;
  double task1b = 0.0;
  double task1c_prob = 0.5;
  double task2 = 0.0;

  int task1a_label() const { return task1a_prob >= 0.5 ? 1 : 0; }
  int task1c_label() const { return task1c_prob >= 0.5 ? 1 : 0; }
};

inline double clamp_rating(double x) { return std::min(5.0, std::max(0.0, x)); }

// ---------------------------------------------------------------------------
// AMTL model: a shared branch plus four private branches over a common
// embedding, four heads on concat(shared, private), and a 5-way branch
// discriminator fed through gradient reversal on the shared path.
// ---------------------------------------------------------------------------

template <typename S>
class Model {
 public:
  static constexpr std::size_t kBranches = 5;  // 0..3 private, 4 shared

  struct ForwardContext {
    bool training = false;
    Rng* rng = nullptr;
  };

  // Per-sample branch outputs prior to concatenation.
  struct SampleForward {
    Tensor<S> shared;                        // S
    std::array<Tensor<S>, 4> private_out;    // H^1..H^4
    std::array<Tensor<S>, 4> head_out;       // scalar head outputs (prob or raw score)
    Tensor<S> disc_logits;                   // [5,5], rows H^1..H^4 then S
  };

  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    embedding_ = EmbeddingTable<S>::create(cfg_.vocab_size, cfg_.embedding_dim, cfg_.max_sequence_length,
                                           seeded_rng(cfg_.seed, "embedding"));
    for (std::size_t b = 0; b < kBranches; ++b) {
      const std::string name = branch_name(b);
      Branch br;
      br.lstm = BiLstmLayer<S>::create(cfg_.embedding_dim, cfg_.hidden_size, seeded_rng(cfg_.seed, name + ".lstm.fwd"),
                                       seeded_rng(cfg_.seed, name + ".lstm.bwd"));
      const std::size_t lstm_out = 2 * cfg_.hidden_size;
      std::size_t proj_in = lstm_out;
      if (cfg_.capsules) {
        br.primary = PrimaryCapsuleLayer<S>::create(cfg_.caps, lstm_out, seeded_rng(cfg_.seed, name + ".primary"));
        br.conv = ConvCapsuleLayer<S>::create(cfg_.caps, seeded_rng(cfg_.seed, name + ".convcaps"));
        const std::size_t max_positions = cfg_.max_sequence_length - cfg_.caps.primary_kernel + 1;
        const std::size_t max_children = (max_positions - cfg_.caps.conv_kernel + 1) * cfg_.caps.conv_filters;
        br.dense = DenseCapsuleLayer<S>::create(cfg_.caps, max_children, seeded_rng(cfg_.seed, name + ".densecaps"));
        proj_in = cfg_.caps.dense_out * cfg_.caps.capsule_dim;
      }
      br.projection = DenseHead<S>::create(proj_in, cfg_.branch_dim, Activation::kLinear,
                                           seeded_rng(cfg_.seed, name + ".projection"));
      branches_[b] = std::move(br);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      const Activation act = (k == 0 || k == 2) ? Activation::kSigmoid : Activation::kLinear;
      heads_[k] = DenseHead<S>::create(2 * cfg_.branch_dim, 1, act, seeded_rng(cfg_.seed, head_name(k)));
    }
    discriminator_ = DenseHead<S>::create(cfg_.branch_dim, kBranches, Activation::kLinear,
                                          seeded_rng(cfg_.seed, "discriminator"));
  }

  const ModelConfig& config() const { return cfg_; }

  // Truncates to the configured maximum and right-pads with the padding
  // token up to the branch minimum. Returns the padded ids and the count of
  // leading non-padding positions.
  std::pair<std::vector<std::size_t>, std::size_t> prepare_tokens(std::vector<std::size_t> tokens) const {
    if (tokens.size() > cfg_.max_sequence_length) tokens.resize(cfg_.max_sequence_length);
    std::size_t valid = tokens.size();
    while (valid > 0 && tokens[valid - 1] == 0) --valid;
    if (valid == 0) valid = tokens.size();
    while (tokens.size() < cfg_.min_sequence_length()) tokens.push_back(0);
    if (tokens.empty()) tokens.push_back(0);
    return {std::move(tokens), std::max<std::size_t>(valid, 1)};
  }

  Tensor<S> encode_branch(std::size_t branch, const std::vector<std::size_t>& padded_tokens, std::size_t valid_len,
                          const ForwardContext& ctx) const {
    if (branch >= kBranches) throw std::invalid_argument("encode_branch: branch index out of range");
    if (ctx.training && cfg_.dropout_rate > 0 && ctx.rng == nullptr) {
      throw std::invalid_argument("encode_branch: training forward requires an rng for dropout");
    }
    const Branch& br = branches_[branch];
    Tensor<S> x = embed(padded_tokens, embedding_);
    Tensor<S> h = bilstm_forward(x, br.lstm);
    h = apply_dropout(h, ctx);
    if (cfg_.capsules) {
      Tensor<S> pc = primary_capsules(h, br.primary, valid_len);
      if (cfg_.dropout_capsules) pc = apply_dropout(pc, ctx);
      Tensor<S> cc = conv_capsules(pc, br.conv);
      if (cfg_.dropout_capsules) cc = apply_dropout(cc, ctx);
      Tensor<S> dc = dense_capsules(cc, br.dense);
      Tensor<S> flat = reshape(dc, Shape{cfg_.caps.dense_out * cfg_.caps.capsule_dim});
      return dense_head(flat, br.projection);
    }
    Tensor<S> pooled = mean_rows(slice_rows(h, 0, valid_len));
    return dense_head(pooled, br.projection);
  }

  SampleForward forward_sample(const std::vector<std::size_t>& tokens, const ForwardContext& ctx) const {
    auto [padded, valid_len] = prepare_tokens(tokens);
    SampleForward out;
    out.shared = encode_branch(4, padded, valid_len, ctx);
    for (std::size_t k = 0; k < 4; ++k) out.private_out[k] = encode_branch(k, padded, valid_len, ctx);
    for (std::size_t k = 0; k < 4; ++k) {
      Tensor<S> joint = concat<S>({out.shared, out.private_out[k]});
      out.head_out[k] = dense_head(joint, heads_[k]);
    }
    std::vector<Tensor<S>> rows;
    rows.reserve(kBranches);
    for (std::size_t k = 0; k < 4; ++k) rows.push_back(dense_head(out.private_out[k].detach(), discriminator_));
    rows.push_back(dense_head(grad_reverse(out.shared, static_cast<S>(cfg_.lambda)), discriminator_));
    out.disc_logits = stack_rows(rows);
    return out;
  }

  std::vector<SampleForward> forward(const std::vector<std::vector<std::size_t>>& batch,
                                     const ForwardContext& ctx) const {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    std::vector<SampleForward> out;
    out.reserve(batch.size());
    for (const auto& tokens : batch) out.push_back(forward_sample(tokens, ctx));
    return out;
  }

  Prediction predict_one(const std::vector<std::size_t>& tokens) const {
    ForwardContext ctx;  // inference
    SampleForward f = forward_sample(tokens, ctx);
    return to_prediction(f);
  }

  std::vector<Prediction> predict(const std::vector<std::vector<std::size_t>>& token_lists) const {
    std::vector<Prediction> out;
    out.reserve(token_lists.size());
    for (const auto& t : token_lists) out.push_back(predict_one(t));
    return out;
  }

  Prediction to_prediction(const SampleForward& f) const {
    Prediction p;
    const double h1 = static_cast<double>(f.head_out[0].item());
    const double h3 = static_cast<double>(f.head_out[2].item());
    if (cfg_.t1a_twice) {
      // Branch 3 is a second opinion on task 1a; the final probability is
      // the mean of the two heads and the raw branch-3 view stays visible
      // in the task1c slot.
      p.task1a_prob = h1 + (h3 - h1) / 2.0;
      p.task1c_prob = h3;
    } else {
      p.task1a_prob = h1;
      p.task1c_prob = h3;
    }
    p.task1b = clamp_rating(static_cast<double>(f.head_out[1].item()));
    p.task2 = clamp_rating(static_cast<double>(f.head_out[3].item()));
    return p;
  }

  // Deterministic [n, 5*branch_dim] matrix of concatenated branch vectors
  // (S first, then H^1..H^4), one row per input, for the PCA exporter.
  struct EmbeddingExport {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t branch_dim = 0;
    std::vector<double> data;  // row-major
  };

  EmbeddingExport export_branch_embeddings(const std::vector<std::vector<std::size_t>>& token_lists) const {
    EmbeddingExport ex;
    ex.branch_dim = cfg_.branch_dim;
    ex.cols = kBranches * cfg_.branch_dim;
    ex.rows = token_lists.size();
    ex.data.reserve(ex.rows * ex.cols);
    ForwardContext ctx;
    for (const auto& tokens : token_lists) {
      SampleForward f = forward_sample(tokens, ctx);
      for (S v : f.shared.values()) ex.data.push_back(static_cast<double>(v));
      for (std::size_t k = 0; k < 4; ++k) {
        for (S v : f.private_out[k].values()) ex.data.push_back(static_cast<double>(v));
      }
    }
    return ex;
  }

  // Everything with storage, discriminator included (checkpoint granularity).
  ParamList<S> all_parameters() const {
    ParamList<S> out;
    embedding_.collect("embedding", out);
    for (std::size_t b = 0; b < kBranches; ++b) {
      const std::string name = branch_name(b);
      branches_[b].lstm.collect(name + ".lstm", out);
      if (cfg_.capsules) {
        branches_[b].primary.collect(name + ".primary", out);
        branches_[b].conv.collect(name + ".convcaps", out);
        branches_[b].dense.collect(name + ".densecaps", out);
      }
      branches_[b].projection.collect(name + ".projection", out);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      heads_[k].collect(head_name(k), out);
    }
    discriminator_.collect("discriminator", out);
    return out;
  }

  // Parameters the optimizer may update; the discriminator participates only
  // while the adversarial term is live, so a lambda=0 run is step-for-step
  // identical to a build with the flag off.
  ParamList<S> trainable_parameters() const {
    ParamList<S> out = all_parameters();
    if (!cfg_.adversarial_active()) {
      std::erase_if(out, [](const auto& kv) { return kv.first.rfind("discriminator", 0) == 0; });
    }
    return out;
  }

  const EmbeddingTable<S>& embedding() const { return embedding_; }
  const DenseHead<S>& head(std::size_t k) const { return heads_.at(k); }
  DenseHead<S>& head(std::size_t k) { return heads_.at(k); }
  const DenseHead<S>& discriminator() const { return discriminator_; }

 private:
  struct Branch {
    BiLstmLayer<S> lstm;
    PrimaryCapsuleLayer<S> primary;
    ConvCapsuleLayer<S> conv;
    DenseCapsuleLayer<S> dense;
    DenseHead<S> projection;
  };

  static std::string branch_name(std::size_t b) { return b == 4 ? "shared" : "branch" + std::to_string(b + 1); }
  static std::string head_name(std::size_t k) { return "head" + std::to_string(k + 1); }

  Tensor<S> apply_dropout(const Tensor<S>& t, const ForwardContext& ctx) const {
    if (!ctx.training || cfg_.dropout_rate == 0) return t;
    return dropout(t, cfg_.dropout_rate, true, *ctx.rng);
  }

  ModelConfig cfg_;
  EmbeddingTable<S> embedding_;
  std::array<Branch, kBranches> branches_;
  std::array<DenseHead<S>, 4> heads_;
  DenseHead<S> discriminator_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary container with the config (JSON), the
// vocabulary, and the named parameter tensors in their declared element
// type. Round-trips are lossless.
// ---------------------------------------------------------------------------

namespace ckpt_detail {

inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

constexpr std::uint64_t kMagic = 0x414d544c434b5031ULL;  // "AMTLCKP1"

}  // namespace ckpt_detail

struct CheckpointHeader {
  ModelConfig config;
  std::vector<std::string> vocab;
  std::size_t scalar_bytes = 4;
};

template <typename S>
void save_checkpoint(const std::string& path, const Model<S>& model, const std::vector<std::string>& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  using namespace ckpt_detail;
  write_u64(os, kMagic);
  write_u64(os, 1);  // version
  write_u64(os, sizeof(S));
  nlohmann::json cfg_json = model.config();
  write_string(os, cfg_json.dump());
  write_u64(os, vocab.size());
  for (const auto& tok : vocab) write_string(os, tok);
  ParamList<S> params = model.all_parameters();
  write_u64(os, params.size());
  for (const auto& [name, tensor] : params) {
    write_string(os, name);
    write_u64(os, tensor.rank());
    for (std::size_t i = 0; i < tensor.rank(); ++i) write_u64(os, tensor.dim(i));
    os.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(tensor.size() * sizeof(S)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

inline CheckpointHeader peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  using namespace ckpt_detail;
  if (read_u64(is) != kMagic) throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  const std::uint64_t version = read_u64(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  CheckpointHeader h;
  h.scalar_bytes = read_u64(is);
  h.config = nlohmann::json::parse(read_string(is)).get<ModelConfig>();
  const std::uint64_t nvocab = read_u64(is);
  h.vocab.reserve(nvocab);
  for (std::uint64_t i = 0; i < nvocab; ++i) h.vocab.push_back(read_string(is));
  return h;
}

template <typename S>
std::pair<Model<S>, std::vector<std::string>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  using namespace ckpt_detail;
  if (read_u64(is) != kMagic) throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  const std::uint64_t version = read_u64(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t scalar_bytes = read_u64(is);
  if (scalar_bytes != sizeof(S)) {
    throw std::runtime_error("checkpoint: element type is " + std::to_string(scalar_bytes * 8) +
                             "-bit but loader expects " + std::to_string(sizeof(S) * 8) + "-bit");
  }
  ModelConfig cfg = nlohmann::json::parse(read_string(is)).get<ModelConfig>();
  const std::uint64_t nvocab = read_u64(is);
  std::vector<std::string> vocab;
  vocab.reserve(nvocab);
  for (std::uint64_t i = 0; i < nvocab; ++i) vocab.push_back(read_string(is));

  Model<S> model(cfg);
  ParamList<S> params = model.all_parameters();
  std::map<std::string, Tensor<S>> by_name(params.begin(), params.end());
  const std::uint64_t count = read_u64(is);
  if (count != params.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                             std::to_string(count));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
    const std::uint64_t rank = read_u64(is);
    Shape shape(rank);
    for (auto& d : shape) d = read_u64(is);
    if (shape != it->second.shape()) {
      throw std::runtime_error("checkpoint: tensor '" + name + "' shape " + shape_str(shape) +
                               " does not match model shape " + shape_str(it->second.shape()));
    }
    is.read(reinterpret_cast<char*>(it->second.data()),
            static_cast<std::streamsize>(it->second.size() * sizeof(S)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
  }
  return {std::move(model), std::move(vocab)};
}

}  // namespace amtl

#endif  // AMTL_MODEL_HPP
