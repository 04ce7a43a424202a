// Python bindings for the core operations: fixed transforms, the learnable
// auto-encoder front-end, separation models, losses and BSS_EVAL metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aetsep/aet.hpp"
#include "aetsep/bss_eval.hpp"
#include "aetsep/corpus.hpp"
#include "aetsep/fixed_frontend.hpp"
#include "aetsep/losses.hpp"
#include "aetsep/separator.hpp"
#include "aetsep/trainer.hpp"
#include "aetsep/wav.hpp"

namespace py = pybind11;
using namespace aetsep;

namespace {

py::array_t<double> tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<double> out(shape);
  std::copy(t.values.begin(), t.values.end(), out.mutable_data());
  return out;
}

Tensor array_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<Index> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.values.begin());
  return t;
}

std::vector<double> array_to_vector(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> vector_to_array(const std::vector<double>& v) {
  std::vector<py::ssize_t> shape = {static_cast<py::ssize_t>(v.size())};
  py::array_t<double> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<Index> index_vector_to_array(const std::vector<Index>& v) {
  std::vector<py::ssize_t> shape = {static_cast<py::ssize_t>(v.size())};
  py::array_t<Index> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

AetConfig make_config(Index num_filters, Index filter_width, Index pool, Index smoothing_len,
                      bool tied) {
  AetConfig cfg;
  cfg.num_filters = num_filters;
  cfg.filter_width = filter_width;
  cfg.pool = pool;
  cfg.smoothing_len = smoothing_len;
  cfg.tied = tied;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adaptive front-end source separation toolkit";

  // ---- fixed front-ends -------------------------------------------------
  m.def(
      "dct2_basis",
      [](Index n, Index k) { return tensor_to_array(dct2_basis(n, k).basis); },
      py::arg("n"), py::arg("k"), "Orthonormal type-II DCT basis rows (K x N).");

  m.def(
      "short_time_transform",
      [](const DoubleArray& x, const DoubleArray& basis, const std::string& window, Index hop) {
        BasisMatrix b;
        b.basis = array_to_tensor(basis);
        WindowKind w = window == "hann" ? WindowKind::kHann : WindowKind::kRectangular;
        return tensor_to_array(short_time_transform(array_to_vector(x), b, w, hop));
      },
      py::arg("x"), py::arg("basis"), py::arg("window") = "hann", py::arg("hop") = 1);

  m.def(
      "stft",
      [](const DoubleArray& x, Index n, Index hop, const std::string& window) {
        WindowKind w = window == "hann" ? WindowKind::kHann : WindowKind::kRectangular;
        StftFrames f = stft(array_to_vector(x), n, hop, w);
        return py::make_tuple(tensor_to_array(f.re), tensor_to_array(f.im));
      },
      py::arg("x"), py::arg("n") = 1024, py::arg("hop") = 16, py::arg("window") = "hann");

  m.def(
      "istft",
      [](const DoubleArray& re, const DoubleArray& im, Index n, Index hop,
         const std::string& window, Index length) {
        StftFrames f;
        f.re = array_to_tensor(re);
        f.im = array_to_tensor(im);
        f.window_len = n;
        f.hop = hop;
        f.window = window == "hann" ? WindowKind::kHann : WindowKind::kRectangular;
        std::vector<double> y = istft(f, length);
        return vector_to_array(y);
      },
      py::arg("re"), py::arg("im"), py::arg("n") = 1024, py::arg("hop") = 16,
      py::arg("window") = "hann", py::arg("length") = -1);

  m.def(
      "smooth_demodulate",
      [](const DoubleArray& coeffs, Index smoothing_len, double eps) {
        MagPhase mp = smooth_demodulate(array_to_tensor(coeffs), smoothing_len, eps);
        return py::make_tuple(tensor_to_array(mp.magnitude), tensor_to_array(mp.carrier));
      },
      py::arg("coeffs"), py::arg("smoothing_len") = 5, py::arg("eps") = 1e-8);

  // ---- AET --------------------------------------------------------------
  py::class_<AetParams>(m, "AetParams")
      .def_property_readonly("analysis", [](const AetParams& p) { return tensor_to_array(p.analysis); })
      .def_property_readonly("smoothing", [](const AetParams& p) { return tensor_to_array(p.smoothing); })
      .def_property_readonly("smoothing_bias",
                             [](const AetParams& p) { return tensor_to_array(p.smoothing_bias); })
      .def_property_readonly("synthesis", [](const AetParams& p) { return tensor_to_array(p.synthesis); });

  m.def(
      "init_aet_params",
      [](Index num_filters, Index filter_width, Index pool, Index smoothing_len, bool tied,
         std::uint64_t seed) {
        return init_params(make_config(num_filters, filter_width, pool, smoothing_len, tied), seed);
      },
      py::arg("num_filters"), py::arg("filter_width"), py::arg("pool") = 16,
      py::arg("smoothing_len") = 5, py::arg("tied") = true, py::arg("seed") = 0);

  m.def(
      "aet_encode",
      [](const DoubleArray& x, const AetParams& params, Index pool, bool tied) {
        AetConfig cfg = make_config(params.analysis.dim(0), params.analysis.dim(1), pool,
                                    params.smoothing.dim(1), tied);
        EncodedSignal enc = encode(array_to_vector(x), bind_params(params, cfg), cfg);
        py::dict out;
        out["coeffs"] = tensor_to_array(enc.coeffs->value);
        out["magnitude"] = tensor_to_array(enc.mag_full->value);
        out["carrier"] = tensor_to_array(enc.carrier->value);
        out["magnitude_pooled"] = tensor_to_array(enc.mag_pooled->value);
        out["pool_indices"] =
            index_vector_to_array(enc.pool_indices);
        return out;
      },
      py::arg("x"), py::arg("params"), py::arg("pool") = 16, py::arg("tied") = true,
      "Analysis encoder: coefficients, magnitude, carrier, pooled magnitude.");

  m.def(
      "aet_reconstruct",
      [](const DoubleArray& x, const AetParams& params, Index pool, bool tied) {
        AetConfig cfg = make_config(params.analysis.dim(0), params.analysis.dim(1), pool,
                                    params.smoothing.dim(1), tied);
        AetNodes nodes = bind_params(params, cfg);
        EncodedSignal enc = encode(array_to_vector(x), nodes, cfg);
        NodePtr wave = decode(enc.mag_pooled, enc, nodes, cfg);
        return vector_to_array(wave->value.values);
      },
      py::arg("x"), py::arg("params"), py::arg("pool") = 16, py::arg("tied") = true,
      "Round trip through the auto-encoder transform (encode then decode).");

  m.def(
      "inspect_bases",
      [](const AetParams& params, Index fft_size) {
        py::list out;
        for (const auto& b : inspect_bases(params, fft_size)) {
          py::dict d;
          d["filter_index"] = b.filter_index;
          d["dominant_bin"] = b.dominant_bin;
          d["filter"] = vector_to_array(b.filter);
          d["spectrum"] =
              vector_to_array(b.spectrum);
          out.append(d);
        }
        return out;
      },
      py::arg("params"), py::arg("fft_size") = 1024);

  // ---- losses & metrics ---------------------------------------------------
  m.def(
      "sdr_db",
      [](const DoubleArray& x, const DoubleArray& y) {
        return sdr_db(array_to_vector(x), array_to_vector(y));
      },
      py::arg("estimate"), py::arg("reference"));

  m.def(
      "mse",
      [](const DoubleArray& x, const DoubleArray& y) {
        return mse_value(array_to_vector(x), array_to_vector(y));
      },
      py::arg("estimate"), py::arg("reference"));

  m.def(
      "sdr_loss",
      [](const DoubleArray& x, const DoubleArray& y) {
        return sdr_loss(constant(array_to_tensor(x)), array_to_vector(y))->value.values[0];
      },
      py::arg("estimate"), py::arg("reference"),
      "Value of the trained objective <xx>/<xy>^2.");

  m.def(
      "bss_eval",
      [](const DoubleArray& estimate, const std::vector<DoubleArray>& references,
         std::size_t target_index, Index filter_len) {
        std::vector<std::vector<double>> refs;
        for (const auto& r : references) refs.push_back(array_to_vector(r));
        BssScores s = bss_eval(array_to_vector(estimate), refs, target_index, filter_len);
        py::dict out;
        out["sdr_db"] = s.sdr_db;
        out["sir_db"] = s.sir_db;
        out["sar_db"] = s.sar_db;
        out["filter_len"] = s.filter_len;
        out["regularized"] = s.regularized;
        return out;
      },
      py::arg("estimate"), py::arg("references"), py::arg("target_index") = 0,
      py::arg("filter_len") = 512);

  // ---- corpus / io --------------------------------------------------------
  m.def("read_wav", [](const std::string& path) {
    Waveform w = read_wav(path);
    return py::make_tuple(
        vector_to_array(w.samples),
        w.sample_rate);
  });
  m.def(
      "write_wav",
      [](const std::string& path, const DoubleArray& samples, double rate) {
        Waveform w;
        w.samples = array_to_vector(samples);
        w.sample_rate = rate;
        write_wav(path, w);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000.0);

  m.def(
      "mix_at_0db",
      [](const DoubleArray& a, const DoubleArray& b, double rate) {
        Waveform wa, wb;
        wa.samples = array_to_vector(a);
        wb.samples = array_to_vector(b);
        wa.sample_rate = wb.sample_rate = rate;
        MixturePair p = mix_at_0db(wa, wb);
        return py::make_tuple(
            vector_to_array(p.mixture.samples),
            vector_to_array(p.source_a.samples),
            vector_to_array(p.source_b.samples));
      },
      py::arg("a"), py::arg("b"), py::arg("sample_rate") = 16000.0);

  // ---- models -------------------------------------------------------------
  py::class_<SeparationModel>(m, "SeparationModel")
      .def_property_readonly("frontend",
                             [](const SeparationModel& m_) { return to_string(m_.frontend); })
      .def_property_readonly("num_filters",
                             [](const SeparationModel& m_) { return m_.geometry.aet.num_filters; })
      .def_property_readonly("sample_rate",
                             [](const SeparationModel& m_) { return m_.geometry.sample_rate; })
      .def_property_readonly(
          "trainable_count",
          [](const SeparationModel& m_) { return trainable_count(m_); })
      .def_property_readonly("aet_params",
                             [](const SeparationModel& m_) { return m_.aet_params; })
      .def(
          "separate",
          [](const SeparationModel& m_, const DoubleArray& mixture) {
            std::vector<double> est = separate(m_, array_to_vector(mixture));
            return vector_to_array(est);
          },
          py::arg("mixture"));

  m.def(
      "build_model",
      [](const std::string& frontend, Index num_filters, Index filter_width, Index pool,
         Index smoothing_len, Index stft_window, Index stft_hop, Index hidden, double sample_rate,
         std::uint64_t seed) {
        ModelGeometry g;
        g.aet = make_config(num_filters, filter_width, pool, smoothing_len, false);
        g.stft.window = stft_window;
        g.stft.hop = stft_hop;
        g.hidden = hidden;
        g.sample_rate = sample_rate;
        return build_model(frontend_from_string(frontend), g, seed);
      },
      py::arg("frontend") = "aet_orthogonal", py::arg("num_filters") = 1024,
      py::arg("filter_width") = 1024, py::arg("pool") = 16, py::arg("smoothing_len") = 5,
      py::arg("stft_window") = 1024, py::arg("stft_hop") = 16, py::arg("hidden") = 512,
      py::arg("sample_rate") = 16000.0, py::arg("seed") = 0);

  m.def(
      "train_on_pairs",
      [](SeparationModel& model, const std::vector<py::tuple>& pairs, const std::string& loss,
         int epochs, Index batch_size, double dropout, double learning_rate, std::uint64_t seed,
         Index segment_len) {
        std::vector<MixturePair> train_pairs;
        for (const auto& tup : pairs) {
          Waveform a, b;
          a.samples = array_to_vector(tup[0].cast<DoubleArray>());
          b.samples = array_to_vector(tup[1].cast<DoubleArray>());
          a.sample_rate = b.sample_rate = model.geometry.sample_rate;
          train_pairs.push_back(mix_at_0db(a, b));
        }
        TrainConfig cfg;
        cfg.loss = loss_from_string(loss);
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.dropout = dropout;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        cfg.segment_len = segment_len;
        cfg.target = TargetSource::kA;
        TrainerState state = train(model, train_pairs, train_pairs, cfg);
        py::list log;
        for (const auto& e : state.log) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["val_sdr_db"] = e.val_sdr_db;
          log.append(d);
        }
        return log;
      },
      py::arg("model"), py::arg("pairs"), py::arg("loss") = "sdr", py::arg("epochs") = 10,
      py::arg("batch_size") = 16, py::arg("dropout") = 0.2, py::arg("learning_rate") = 1e-4,
      py::arg("seed") = 0, py::arg("segment_len") = 8192,
      "Train against (source_a, source_b) waveform pairs, target source_a.");

  m.def("save_checkpoint", [](const SeparationModel& model, const std::string& path) {
    save_checkpoint({model, {}, {}}, path);
  });
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path).model; });

  m.attr("__version__") = "0.1.0";
}
