#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <complex>
#include <string>
#include <vector>

#include "specprint/arch_dsl.hpp"
#include "specprint/attribution.hpp"
#include "specprint/conv.hpp"
#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/fingerprint.hpp"
#include "specprint/io.hpp"
#include "specprint/synthetic_images.hpp"
#include "specprint/upsample.hpp"

namespace py = pybind11;
using namespace specprint;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

/// (H, W) arrays become one channel; (C, H, W) arrays keep their channels.
Tensor3 to_tensor(const Array& a) {
  if (a.ndim() == 2) return Tensor3::from_matrix(to_matrix(a));
  if (a.ndim() != 3) throw DataError("expected a 2-D or 3-D array");
  const auto c = static_cast<std::size_t>(a.shape(0)), h = static_cast<std::size_t>(a.shape(1)),
             w = static_cast<std::size_t>(a.shape(2));
  return Tensor3(c, h, w, std::vector<double>(a.data(), a.data() + c * h * w));
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array from_tensor(const Tensor3& t) {
  Array out({t.channels(), t.height(), t.width()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ComplexArray from_spectrum(const Spectrum2& s) {
  ComplexArray out({s.height(), s.width()});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

Spectrum2 to_spectrum(const ComplexArray& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-D array");
  Spectrum2 s(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + s.size(), s.values().begin());
  return s;
}

/// Weights shaped (out, in, k, k), optional bias of length out.
ConvKernel to_kernel(const Array& w, const std::optional<Array>& bias) {
  if (w.ndim() != 4 || w.shape(2) != w.shape(3)) throw DataError("kernel must be shaped (out, in, k, k)");
  ConvKernel k(static_cast<std::size_t>(w.shape(1)), static_cast<std::size_t>(w.shape(0)),
               static_cast<std::size_t>(w.shape(2)));
  std::copy(w.data(), w.data() + k.weights().size(), k.weights().begin());
  if (bias) {
    if (bias->ndim() != 1 || static_cast<std::size_t>(bias->shape(0)) != k.out_channels())
      throw DataError("bias length must equal the output channel count");
    std::copy(bias->data(), bias->data() + k.out_channels(), k.bias().begin());
  }
  return k;
}

PaddingMode padding_from(const std::string& s) {
  if (s == "same" || s == "zero") return PaddingMode::zero_same;
  if (s == "valid") return PaddingMode::valid;
  if (s == "circular") return PaddingMode::circular;
  throw DataError("unknown padding '" + s + "'");
}

UpsampleMode upsample_from(const std::string& s) {
  if (s == "nearest") return UpsampleMode::nearest();
  if (s == "bilinear") return UpsampleMode::bilinear();
  throw DataError("unknown upsampling '" + s + "' (nearest or bilinear)");
}

std::vector<Tensor3> to_tensors(const std::vector<Array>& images) {
  std::vector<Tensor3> out;
  for (const auto& a : images) out.push_back(to_tensor(a));
  return out;
}

Fingerprint to_fingerprint(const Array& a) {
  Fingerprint f;
  if (a.ndim() == 2) {
    f.rows = static_cast<std::size_t>(a.shape(0));
    f.cols = static_cast<std::size_t>(a.shape(1));
  } else if (a.ndim() != 1) {
    throw DataError("fingerprint must be 1-D or 2-D");
  }
  f.values.assign(a.data(), a.data() + a.size());
  return f;
}

Array fingerprint_array(const Fingerprint& f) {
  Array out({f.rows, f.cols});
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_specprint, m) {
  m.doc() = "Spectral fingerprints of image generators.";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("dft2", [](const Array& x) { return from_spectrum(dft2(to_matrix(x))); }, py::arg("x"),
        "Unnormalized 2-D DFT of a real matrix.");
  m.def("idft2", [](const ComplexArray& f) { return from_matrix(idft2(to_spectrum(f))); }, py::arg("f"),
        "Real part of the inverse 2-D DFT (with the 1/MN factor).");
  m.def("magnitude_spectrum", [](const Array& x) { return from_matrix(magnitude(dft2(to_matrix(x)))); },
        py::arg("x"));
  m.def("fftshift", [](const Array& x) { return from_matrix(fftshift_view(to_matrix(x))); }, py::arg("x"));

  m.def(
      "power_law_image",
      [](std::size_t rows, std::size_t cols, double a, double b, std::uint64_t seed) {
        Rng rng(seed);
        return from_matrix(power_law_image(rows, cols, a, b, rng));
      },
      py::arg("rows"), py::arg("cols"), py::arg("a"), py::arg("b"), py::arg("seed") = 0);
  m.def(
      "random_power_law_tensor",
      [](std::size_t channels, std::size_t rows, std::size_t cols, std::uint64_t seed) {
        Rng rng(seed);
        return from_tensor(random_power_law_tensor(channels, rows, cols, rng));
      },
      py::arg("channels"), py::arg("rows"), py::arg("cols"), py::arg("seed") = 0);

  m.def(
      "conv2",
      [](const Array& x, const Array& w, const std::optional<Array>& bias, const std::string& padding,
         bool via_dft) {
        const Tensor3 t = to_tensor(x);
        const ConvKernel k = to_kernel(w, bias);
        const PaddingMode p = padding_from(padding);
        return from_tensor(via_dft ? conv2_via_dft(t, k, p) : conv2_spatial(t, k, p));
      },
      py::arg("x"), py::arg("weights"), py::arg("bias") = py::none(), py::arg("padding") = "same",
      py::arg("via_dft") = false, "True 2-D convolution of a (C, H, W) input with (out, in, k, k) weights.");
  m.def(
      "upsample",
      [](const Array& x, const std::string& kind, bool circular) {
        const Tensor3 t = to_tensor(x);
        const UpsampleMode mode = upsample_from(kind);
        return from_tensor(circular ? upsample_circular(t, mode) : upsample(t, mode));
      },
      py::arg("x"), py::arg("kind") = "nearest", py::arg("circular") = false);

  m.def("azimuthal_integral",
        [](const Array& mag) { return from_vector(azimuthal_integral(to_matrix(mag)).values); },
        py::arg("magnitude"));
  m.def("hp_ratio", [](const Array& mag) { return hp_ratio(to_matrix(mag)).value; }, py::arg("magnitude"),
        "High-frequency share of the azimuthal integral of a magnitude spectrum.");
  m.def("feature_hp_ratio", [](const Array& x) { return feature_hp_ratio(to_tensor(x)); }, py::arg("x"));

  m.def(
      "extract_fingerprint",
      [](const std::vector<Array>& images, double cutoff, bool per_channel) {
        return fingerprint_array(extract_fingerprint(
            to_tensors(images), cutoff, per_channel ? ChannelMode::per_channel : ChannelMode::mean_image));
      },
      py::arg("images"), py::arg("cutoff") = kDefaultCutoff, py::arg("per_channel") = false,
      "Unit-norm high-passed log mean magnitude spectrum, shaped (H, W).");
  m.def(
      "cosine",
      [](const Array& a, const Array& b) {
        return cosine(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                      std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "kernel_spectrum_similarity",
      [](const Array& w, const std::vector<Array>& outputs, double cutoff) {
        return kernel_spectrum_similarity(to_kernel(w, std::nullopt), to_tensors(outputs), cutoff);
      },
      py::arg("weights"), py::arg("outputs"), py::arg("cutoff") = kDefaultCutoff);

  m.def(
      "roc",
      [](const std::vector<double>& scores, const std::vector<bool>& labels) {
        const RocCurve r = roc(scores, labels);
        py::dict d;
        d["thresholds"] = r.thresholds;
        d["tpr"] = r.tpr;
        d["fpr"] = r.fpr;
        d["auc"] = r.auc;
        return d;
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "best_accuracy",
      [](const std::vector<double>& scores, const std::vector<bool>& labels) {
        const ThresholdChoice c = best_accuracy(scores, labels);
        return py::make_tuple(c.value, c.threshold);
      },
      py::arg("scores"), py::arg("labels"), "(accuracy, threshold) maximizing plain accuracy.");
  m.def(
      "identify",
      [](const Array& probe, const std::vector<Array>& gallery, double threshold) {
        Gallery g;
        g.threshold = threshold;
        for (std::size_t i = 0; i < gallery.size(); ++i) {
          g.ids.push_back(i);
          g.prints.push_back(to_fingerprint(gallery[i]));
        }
        const Identification r = identify_open_set(to_fingerprint(probe), g);
        return py::make_tuple(r.id == kUnknown ? py::object(py::none()) : py::object(py::int_(r.id)), r.score);
      },
      py::arg("probe"), py::arg("gallery"), py::arg("threshold") = 0.5,
      "(gallery index or None when below the threshold, best score).");

  m.def("parse_arch", [](const std::string& text) { return print_arch(parse_arch(text)); }, py::arg("text"),
        "Parses architecture text and returns its canonical form.");
  m.def(
      "attenuation",
      [](const std::string& arch, const Array& input, std::uint64_t seed) {
        Rng rng(seed);
        const Tensor3 x = to_tensor(input);
        const SimResult r = forward_sim(parse_arch(arch), x, rng);
        std::vector<std::pair<std::string, double>> out{{"input", feature_hp_ratio(x)}};
        for (const auto& [name, t] : r.taps) out.emplace_back(name, feature_hp_ratio(t));
        return out;
      },
      py::arg("arch"), py::arg("input"), py::arg("seed") = 0,
      "hp_ratio after every component of a simulated architecture, starting with the input.");

  m.def("load_image", [](const fs::path& p) { return from_tensor(load_image(p)); }, py::arg("path"));
  m.def("save_image", [](const Array& x, const fs::path& p) { save_image(to_tensor(x), p); }, py::arg("x"),
        py::arg("path"));
  m.def(
      "load_tensor",
      [](const fs::path& p) {
        const TensorFile t = load_tensor(p);
        std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
        Array out(shape);
        std::copy(t.values.begin(), t.values.end(), out.mutable_data());
        return out;
      },
      py::arg("path"));
}
