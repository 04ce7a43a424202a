#include "aetsep/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "aetsep/rng.hpp"

namespace aetsep {

std::string to_string(LossKind kind) { return kind == LossKind::kMse ? "mse" : "sdr"; }

LossKind loss_from_string(const std::string& name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "sdr") return LossKind::kSdr;
  throw std::invalid_argument("unknown loss kind: " + name);
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer: " + name);
}

std::string to_string(TargetSource target) { return target == TargetSource::kA ? "a" : "b"; }

TargetSource target_from_string(const std::string& name) {
  if (name == "a") return TargetSource::kA;
  if (name == "b") return TargetSource::kB;
  throw std::invalid_argument("unknown target source: " + name + " (expected 'a' or 'b')");
}

void validate(const TrainConfig& config) {
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0)
    throw std::invalid_argument("dropout must lie in [0, 1)");
  // zero is allowed: it makes an epoch a null update, which has its uses in
  // debugging and tests
  if (config.learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  if (config.segment_len < 1) throw std::invalid_argument("segment length must be >= 1");
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, std::int64_t step, double lr,
               double beta1, double beta2, double eps) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch " +
                                shape_str(param.shape) + " vs " + shape_str(grad.shape));
  if (state.m.values.empty()) state.m = Tensor(param.shape);
  if (state.v.values.empty()) state.v = Tensor(param.shape);
  if (!state.m.same_shape(param) || !state.v.same_shape(param))
    throw std::invalid_argument("adam_step: optimizer state shape mismatch");
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.values.size(); ++i) {
    double g = grad.values[i];
    state.m.values[i] = beta1 * state.m.values[i] + (1.0 - beta1) * g;
    state.v.values[i] = beta2 * state.v.values[i] + (1.0 - beta2) * g * g;
    double mhat = state.m.values[i] / bc1;
    double vhat = state.v.values[i] / bc2;
    param.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void sgd_step(Tensor& param, const Tensor& grad, double lr) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("sgd_step: parameter/gradient shape mismatch");
  for (std::size_t i = 0; i < param.values.size(); ++i) param.values[i] -= lr * grad.values[i];
}

namespace {

double validation_sdr(const SeparationModel& model, const std::vector<MixturePair>& val_pairs,
                      TargetSource target) {
  if (val_pairs.empty()) return std::nan("");
  double acc = 0.0;
  for (const auto& pair : val_pairs) {
    std::vector<double> est = separate(model, pair.mixture.samples);
    const auto& ref = target == TargetSource::kA ? pair.source_a.samples : pair.source_b.samples;
    acc += sdr_db(est, ref);
  }
  return acc / static_cast<double>(val_pairs.size());
}

}  // namespace

TrainerState train(SeparationModel& model, const std::vector<MixturePair>& train_pairs,
                   const std::vector<MixturePair>& val_pairs, const TrainConfig& config,
                   TrainerState state, bool verbose) {
  validate(config);
  if (train_pairs.empty()) throw std::invalid_argument("train: empty training set");

  auto params = named_parameters(model);
  Rng dropout_rng = Rng(config.seed).fork(0xd40);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    BatchIterator batches(train_pairs, config.target, config.segment_len, config.batch_size,
                          config.seed, static_cast<std::uint64_t>(epoch));
    SegmentBatch batch;
    double epoch_loss = 0.0;
    std::size_t batch_count = 0;

    while (batches.next(batch)) {
      std::size_t b = batch.mixtures.size();
      std::map<std::string, Tensor> grad_acc;
      double batch_loss = 0.0;

      // one graph per segment; gradients of the batch-mean loss accumulate
      // across graphs
      for (std::size_t item = 0; item < b; ++item) {
        ForwardResult fwd = separate_forward(model, batch.mixtures[item], config.dropout, true,
                                             dropout_rng.next_u64());
        NodePtr loss = make_loss(config.loss, fwd.estimate, batch.targets[item]);
        double value = loss->value.values[0];
        if (!std::isfinite(value))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_count) + ", segment " +
                                   std::to_string(item));
        batch_loss += value;
        backward(loss);
        double inv_b = 1.0 / static_cast<double>(b);
        for (auto& [name, node] : fwd.params) {
          auto it = grad_acc.find(name);
          if (it == grad_acc.end()) it = grad_acc.emplace(name, Tensor(node->value.shape)).first;
          for (std::size_t i = 0; i < it->second.values.size(); ++i)
            it->second.values[i] += inv_b * node->grad.values[i];
        }
      }
      batch_loss /= static_cast<double>(b);
      epoch_loss += batch_loss;
      ++batch_count;

      ++state.step_count;
      for (auto& [name, tensor] : params) {
        const Tensor& grad = grad_acc.at(name);
        if (config.optimizer == OptimizerKind::kAdam)
          adam_step(*tensor, grad, state.adam[name], state.step_count, config.learning_rate);
        else
          sgd_step(*tensor, grad, config.learning_rate);
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = batch_count ? epoch_loss / static_cast<double>(batch_count) : 0.0;
    entry.val_sdr_db = validation_sdr(model, val_pairs, config.target);
    state.log.push_back(entry);
    if (verbose)
      std::cerr << "epoch " << epoch << ": train_loss=" << entry.train_loss
                << " val_sdr_db=" << entry.val_sdr_db << "\n";
  }
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'E', 'T', 'S', 'E', 'P', 'v', '1'};

std::uint32_t crc32_update(std::uint32_t crc, const unsigned char* data, std::size_t n) {
  static std::uint32_t table[256];
  static bool ready = false;
  if (!ready) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int bit = 0; bit < 8; ++bit) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    ready = true;
  }
  crc ^= 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

class PayloadWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class PayloadReader {
 public:
  PayloadReader(const unsigned char* data, std::size_t n) : data_(data), size_(n) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw std::runtime_error("checkpoint: truncated payload");
  }
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_tensor(PayloadWriter& w, const std::string& name, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.raw(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (Index d : t.shape) w.u64(static_cast<std::uint64_t>(d));
  for (double v : t.values) w.f64(v);
}

Tensor read_tensor(PayloadReader& r, std::string& name) {
  name = r.str(r.u32());
  std::uint32_t rank = r.u32();
  std::vector<Index> shape(rank);
  for (auto& d : shape) d = static_cast<Index>(r.u64());
  Tensor t(shape);
  for (auto& v : t.values) v = r.f64();
  return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const SeparationModel& model = checkpoint.model;
  std::ostringstream header;
  header << "format=1\n";
  header << "frontend=" << to_string(model.frontend) << "\n";
  header << "num_filters=" << model.geometry.aet.num_filters << "\n";
  header << "filter_width=" << model.geometry.aet.filter_width << "\n";
  header << "pool=" << model.geometry.aet.pool << "\n";
  header << "smoothing_len=" << model.geometry.aet.smoothing_len << "\n";
  header << "tied=" << (model.geometry.aet.tied ? 1 : 0) << "\n";
  header << "stft_window=" << model.geometry.stft.window << "\n";
  header << "stft_hop=" << model.geometry.stft.hop << "\n";
  header << "hidden=" << model.geometry.hidden << "\n";
  header << "sample_rate=" << model.geometry.sample_rate << "\n";
  header << "loss=" << to_string(checkpoint.config.loss) << "\n";
  header << "optimizer=" << to_string(checkpoint.config.optimizer) << "\n";
  header << "learning_rate=" << checkpoint.config.learning_rate << "\n";
  header << "dropout=" << checkpoint.config.dropout << "\n";
  header << "batch_size=" << checkpoint.config.batch_size << "\n";
  header << "segment_len=" << checkpoint.config.segment_len << "\n";
  header << "epochs=" << checkpoint.config.epochs << "\n";
  header << "seed=" << checkpoint.config.seed << "\n";
  header << "target=" << to_string(checkpoint.config.target) << "\n";
  header << "step_count=" << checkpoint.state.step_count << "\n";

  PayloadWriter w;
  std::string header_text = header.str();
  w.u64(header_text.size());
  w.raw(header_text);

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  auto& mut = const_cast<SeparationModel&>(model);  // named_parameters needs mutable refs
  for (auto& [name, tensor] : named_parameters(mut)) tensors.emplace_back(name, tensor);
  for (const auto& [name, adam] : checkpoint.state.adam) {
    tensors.emplace_back("adam.m." + name, &adam.m);
    tensors.emplace_back("adam.v." + name, &adam.v);
  }
  Tensor loss_log({static_cast<Index>(checkpoint.state.log.size())});
  Tensor val_log({static_cast<Index>(checkpoint.state.log.size())});
  for (std::size_t i = 0; i < checkpoint.state.log.size(); ++i) {
    loss_log.values[i] = checkpoint.state.log[i].train_loss;
    val_log.values[i] = checkpoint.state.log[i].val_sdr_db;
  }
  tensors.emplace_back("log.train_loss", &loss_log);
  tensors.emplace_back("log.val_sdr_db", &val_log);

  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (auto& [name, tensor] : tensors) write_tensor(w, name, *tensor);

  std::uint32_t crc = crc32_update(0, w.bytes().data(), w.bytes().size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create checkpoint: " + path);
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  unsigned char crc_bytes[4] = {
      static_cast<unsigned char>(crc & 0xff), static_cast<unsigned char>((crc >> 8) & 0xff),
      static_cast<unsigned char>((crc >> 16) & 0xff), static_cast<unsigned char>((crc >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(crc_bytes), 4);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (file.size() < 12) throw std::runtime_error("checkpoint too short: " + path);
  if (std::memcmp(file.data(), kMagic, 8) != 0) {
    if (std::memcmp(file.data(), "AETSEP", 6) == 0)
      throw std::runtime_error("checkpoint version mismatch: expected AETSEPv1");
    throw std::runtime_error("not an AETSEP checkpoint: " + path);
  }

  std::size_t payload_len = file.size() - 12;
  const unsigned char* payload = file.data() + 8;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(file[file.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
  if (crc32_update(0, payload, payload_len) != stored)
    throw std::runtime_error("checkpoint checksum mismatch: " + path);

  PayloadReader r(payload, payload_len);
  std::string header_text = r.str(static_cast<std::size_t>(r.u64()));
  std::map<std::string, std::string> header;
  std::istringstream hs(header_text);
  std::string line;
  while (std::getline(hs, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw std::runtime_error("checkpoint header misses key: " + key);
    return it->second;
  };
  if (get("format") != "1")
    throw std::runtime_error("checkpoint format version " + get("format") + " not supported");

  Checkpoint cp;
  cp.model.frontend = frontend_from_string(get("frontend"));
  cp.model.geometry.aet.num_filters = std::stoll(get("num_filters"));
  cp.model.geometry.aet.filter_width = std::stoll(get("filter_width"));
  cp.model.geometry.aet.pool = std::stoll(get("pool"));
  cp.model.geometry.aet.smoothing_len = std::stoll(get("smoothing_len"));
  cp.model.geometry.aet.tied = get("tied") == "1";
  cp.model.geometry.stft.window = std::stoll(get("stft_window"));
  cp.model.geometry.stft.hop = std::stoll(get("stft_hop"));
  cp.model.geometry.hidden = std::stoll(get("hidden"));
  cp.model.geometry.sample_rate = std::stod(get("sample_rate"));
  cp.config.loss = loss_from_string(get("loss"));
  cp.config.optimizer = optimizer_from_string(get("optimizer"));
  cp.config.learning_rate = std::stod(get("learning_rate"));
  cp.config.dropout = std::stod(get("dropout"));
  cp.config.batch_size = std::stoll(get("batch_size"));
  cp.config.segment_len = std::stoll(get("segment_len"));
  cp.config.epochs = std::stoi(get("epochs"));
  cp.config.seed = std::stoull(get("seed"));
  cp.config.target = target_from_string(get("target"));
  cp.state.step_count = std::stoll(get("step_count"));

  std::map<std::string, Tensor> tensors;
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Tensor t = read_tensor(r, name);
    tensors.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes after tensors");

  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint misses tensor: " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  // rebuild parameter containers with the right shapes, then fill them
  cp.model.separator.input_dim = cp.model.coeff_dim();
  cp.model.separator.hidden = cp.model.geometry.hidden;
  if (cp.model.frontend != FrontendKind::kStft) {
    cp.model.aet_params.analysis = take("aet.analysis");
    cp.model.aet_params.smoothing = take("aet.smoothing");
    cp.model.aet_params.smoothing_bias = take("aet.smoothing_bias");
    if (!cp.model.geometry.aet.tied) cp.model.aet_params.synthesis = take("aet.synthesis");
  }
  for (int i = 0; i < 4; ++i) {
    cp.model.separator.weights.push_back(take("sep.w" + std::to_string(i)));
    cp.model.separator.biases.push_back(take("sep.b" + std::to_string(i)));
  }

  for (auto& [name, tensor] : tensors) {
    if (name.rfind("adam.m.", 0) == 0)
      cp.state.adam[name.substr(7)].m = tensor;
    else if (name.rfind("adam.v.", 0) == 0)
      cp.state.adam[name.substr(7)].v = tensor;
  }
  Tensor loss_log = take("log.train_loss");
  Tensor val_log = take("log.val_sdr_db");
  for (Index i = 0; i < loss_log.numel(); ++i) {
    EpochLog entry;
    entry.epoch = static_cast<int>(i);
    entry.train_loss = loss_log.values[static_cast<std::size_t>(i)];
    entry.val_sdr_db = val_log.values[static_cast<std::size_t>(i)];
    cp.state.log.push_back(entry);
  }
  return cp;
}

}  // namespace aetsep
