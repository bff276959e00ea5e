#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "nstate/cli.hpp"
#include "nstate/data.hpp"
#include "nstate/dsp.hpp"
#include "nstate/metrics.hpp"
#include "nstate/model_io.hpp"
#include "nstate/models.hpp"
#include "nstate/montage.hpp"
#include "nstate/splitter.hpp"
#include "nstate/training.hpp"

namespace py = pybind11;
using namespace nstate;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

template <typename T>
Tensor<T> to_tensor(const Array<T>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor<T> t(shape);
  std::copy_n(a.data(), t.size(), t.data());
  return t;
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  py::array_t<T> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy_n(t.data(), t.size(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(std::vector<py::ssize_t>{py::ssize_t(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<Vec3> to_points(const Array<double>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ContractError("positions must be [n x 3]");
  std::vector<Vec3> pts(std::size_t(a.shape(0)));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k) pts[i][k] = a.at(i, k);
  return pts;
}

// Epoch set from [E x C x S] samples and labels; channels are named E1..EC.
EpochSet make_epochs(const Array<float>& x, const std::vector<int>& labels,
                     std::vector<std::string> groups) {
  if (x.ndim() != 3) throw ContractError("epochs must be [E x C x S]");
  EpochSet s;
  s.epochs = to_tensor(x);
  s.labels = labels;
  for (py::ssize_t c = 0; c < x.shape(1); ++c) s.channels.push_back("E" + std::to_string(c + 1));
  if (groups.empty()) groups.assign(labels.size(), "all");
  s.groups = std::move(groups);
  s.validate();
  return s;
}

class PyModel {
 public:
  PyModel(const std::string& arch, std::size_t channels, std::size_t timesteps)
      : spec_(make_spec(architecture_from_string(arch), channels, timesteps)),
        model_(build_model<float>(spec_)) {}
  explicit PyModel(LoadedModel m) : spec_(m.spec), model_(std::move(m.model)), seed_(m.seed) {}
  PyModel(const PyModel&) = delete;
  PyModel(PyModel&&) = default;

  std::size_t count_params() { return model_.count_params(); }
  void init(std::uint64_t seed) {
    seed_ = seed;
    model_.init_params(seed);
  }
  py::array_t<double> predict(const Array<float>& x) {
    const EpochSet s = make_epochs(x, std::vector<int>(std::size_t(x.shape(0)), 0), {});
    const auto p = nstate::predict(model_, s);
    return to_array(p.probabilities);
  }
  py::object fit(const Array<float>& x, const std::vector<int>& y, const Array<float>& val_x,
                 const std::vector<int>& val_y, std::size_t epochs, std::size_t batch_size,
                 std::uint64_t seed, std::optional<double> lr) {
    const EpochSet tr = make_epochs(x, y, {}), va = make_epochs(val_x, val_y, {});
    TrainOptions o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.seed = seed;
    o.learning_rate = lr.value_or(spec_.learning_rate);
    TrainHistory h;
    {
      py::gil_scoped_release release;
      h = train(model_, tr, va, o);
    }
    py::list out;
    for (const auto& r : h.records) {
      py::dict d;
      d["epoch"] = r.epoch;
      d["train_loss"] = r.train_loss;
      d["train_acc"] = r.train_acc;
      d["val_loss"] = r.val_loss;
      d["val_acc"] = r.val_acc;
      out.append(d);
    }
    return out;
  }
  void save(const std::filesystem::path& path) { save_model(path, model_, spec_, seed_); }
  py::object audit() { return to_py(param_audit(model_).to_json()); }
  py::object spec() const { return to_py(spec_.to_json()); }

 private:
  ModelSpec spec_;
  Sequential<float> model_;
  std::uint64_t seed_ = 0;
};

}  // namespace

PYBIND11_MODULE(_nstate, m) {
  m.doc() = "EEG state classification toolkit";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a CLI command; returns (exit code, stdout, stderr).");

  // models
  m.def(
      "param_audit",
      [](const std::string& arch, std::size_t channels) {
        return to_py(param_audit(make_spec(architecture_from_string(arch), channels)).to_json());
      },
      py::arg("model"), py::arg("channels") = 26);
  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, std::size_t, std::size_t>(), py::arg("model"),
           py::arg("channels") = 26, py::arg("timesteps") = 250)
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_unique<PyModel>(load_model(p));
      })
      .def("count_params", &PyModel::count_params)
      .def("init", &PyModel::init, py::arg("seed"))
      .def("predict", &PyModel::predict, py::arg("x"), "Probabilities of the positive (GI) class.")
      .def("fit", &PyModel::fit, py::arg("x"), py::arg("y"), py::arg("val_x"), py::arg("val_y"),
           py::arg("epochs") = 10, py::arg("batch_size") = 64, py::arg("seed") = 0,
           py::arg("lr") = py::none())
      .def("save", &PyModel::save)
      .def("audit", &PyModel::audit)
      .def_property_readonly("spec", &PyModel::spec);

  m.def(
      "bce_loss",
      [](const std::vector<double>& p, const std::vector<int>& y) { return bce_loss(p, y).loss; },
      py::arg("predictions"), py::arg("labels"));

  // dsp
  m.def(
      "design_bandpass",
      [](double low, double high, double fs) {
        const auto f = design_bandpass(low, high, fs);
        return to_array(f.taps);
      },
      py::arg("low") = 1.0, py::arg("high") = 45.0, py::arg("fs") = 250.0);
  m.def(
      "filtfilt",
      [](const Array<double>& x, double low, double high, double fs) {
        const auto f = design_bandpass(low, high, fs);
        if (x.ndim() == 1) {
          return to_array(filtfilt(std::span<const double>(x.data(), std::size_t(x.size())), f));
        }
        return to_array(filtfilt(to_tensor(x), f));
      },
      py::arg("x"), py::arg("low") = 1.0, py::arg("high") = 45.0, py::arg("fs") = 250.0);
  m.def(
      "welch_psd",
      [](const Array<double>& x, double fs, std::size_t segment, double overlap) {
        const auto p = welch_psd(to_tensor(x), fs, segment, overlap);
        return py::make_tuple(to_array(p.freqs), to_array(p.power));
      },
      py::arg("x"), py::arg("fs") = 250.0, py::arg("segment") = 250, py::arg("overlap") = 0.5);
  m.def(
      "band_powers",
      [](const Array<double>& x, double fs) {
        const auto p = welch_psd(to_tensor(x), fs);
        py::dict out;
        for (const auto& b : standard_bands()) out[py::str(b.name)] = band_power(p, b);
        return out;
      },
      py::arg("x"), py::arg("fs") = 250.0, "Per-channel power in each standard band.");

  // montage
  m.def("cogn26_channels", &cogn26_channels);
  m.def(
      "synthetic_montage",
      [](std::size_t channels) {
        const Montage mt = synthetic_montage(channels);
        py::array_t<double> pos(std::vector<py::ssize_t>{py::ssize_t(mt.size()), 3});
        for (std::size_t i = 0; i < mt.size(); ++i)
          for (int k = 0; k < 3; ++k) pos.mutable_at(i, k) = mt.positions[i][k];
        return py::make_tuple(mt.names, pos);
      },
      py::arg("channels") = 256, "Returns (names, positions [n x 3]).");
  m.def("spline_g", &spline_g, py::arg("cosine"), py::arg("stiffness") = 4, py::arg("n_terms") = 50);
  m.def(
      "spline_interpolate",
      [](const Array<double>& good, const Array<double>& data, const Array<double>& targets) {
        return to_array(spline_interpolate(to_points(good), to_tensor(data), to_points(targets)));
      },
      py::arg("good_positions"), py::arg("good_data"), py::arg("target_positions"));
  m.def(
      "ransac_bad_channels",
      [](const Array<float>& data, const std::vector<std::string>& names, const Array<double>& positions,
         std::uint64_t seed) {
        Montage mt;
        const auto pts = to_points(positions);
        if (pts.size() != names.size()) throw ContractError("names and positions differ in length");
        for (std::size_t i = 0; i < pts.size(); ++i) mt.add_channel(names[i], pts[i]);
        Recording rec;
        rec.subject = "python";
        rec.channels = names;
        rec.data = to_tensor(data);
        RansacParams p;
        p.seed = seed;
        py::gil_scoped_release release;
        return ransac_bad_channels(rec, mt, p);
      },
      py::arg("data"), py::arg("names"), py::arg("positions"), py::arg("seed") = 0);

  // data and metrics
  m.def(
      "read_container",
      [](const std::filesystem::path& path) {
        auto v = read_container(path);
        py::dict d;
        if (auto* r = std::get_if<Recording>(&v)) {
          d["kind"] = "recording";
          d["data"] = to_array(r->data);
          d["channels"] = r->channels;
          d["subject"] = r->subject;
          d["condition"] = to_string(r->condition);
          d["fs"] = r->fs;
          d["provenance"] = to_py(r->provenance);
        } else {
          auto& e = std::get<EpochSet>(v);
          d["kind"] = "epochs";
          d["data"] = to_array(e.epochs);
          d["labels"] = e.labels;
          d["groups"] = e.groups;
          d["channels"] = e.channels;
          d["fs"] = e.fs;
          d["provenance"] = to_py(e.provenance);
        }
        return d;
      },
      py::arg("path"));
  m.def(
      "stratified_group_kfold",
      [](const std::vector<int>& labels, const std::vector<std::string>& groups, std::size_t k,
         std::uint64_t seed) {
        const FoldPlan plan = stratified_group_kfold(labels, groups, k, seed);
        py::list out;
        for (const auto& f : plan.folds) out.append(py::make_tuple(f.train, f.val));
        return out;
      },
      py::arg("labels"), py::arg("groups"), py::arg("k") = 6, py::arg("seed") = 0,
      "List of (train indices, val indices).");
  m.def(
      "compute_metrics",
      [](const std::vector<int>& predicted, const std::vector<int>& truth, double loss) {
        return to_py(compute_metrics(confusion(predicted, truth), loss).to_json());
      },
      py::arg("predicted"), py::arg("truth"), py::arg("loss") = 0.0);
}
