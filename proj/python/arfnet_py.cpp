// Copyright 2026 The ARFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arfnet/cli.hpp"
#include "arfnet/config.hpp"
#include "arfnet/contrast.hpp"
#include "arfnet/errors.hpp"
#include "arfnet/losses.hpp"
#include "arfnet/pipeline.hpp"

namespace py = pybind11;
using namespace arfnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.storage().begin(), t.storage().end(), out.mutable_data());
  return out;
}

Labels to_labels(const std::vector<std::size_t>& v) {
  Labels out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<std::size_t> from_labels(const Labels& a) {
  std::vector<std::size_t> out;
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw ConfigError("python: negative label");
    out.push_back(static_cast<std::size_t>(a.data()[i]));
  }
  return out;
}

data::Dataset make_dataset(const Array& images, std::optional<Labels> labels, std::size_t num_classes) {
  if (images.ndim() != 4) throw ConfigError("python: images must be (N, 3, H, W)");
  data::Dataset d;
  d.images = to_tensor(images);
  if (labels) d.labels = from_labels(*labels);
  for (std::size_t k = 0; k < num_classes; ++k) d.class_names.push_back("class" + std::to_string(k));
  return d;
}

py::dict metrics_dict(const pipeline::Metrics& m) {
  py::dict d;
  d["count"] = m.count;
  d["accuracy"] = m.accuracy;
  d["mean_class_accuracy"] = m.mean_class_accuracy;
  d["per_class_accuracy"] = m.per_class_accuracy;
  d["confusion"] = m.confusion;
  return d;
}

}  // namespace

PYBIND11_MODULE(_arfnet, m) {
  m.doc() = "Source-free domain adaptation with attention-enhanced features";
  m.attr("__version__") = ARFNET_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<config::Config>(m, "Config")
      .def(py::init<>())
      .def("set", &config::Config::set, py::arg("key"), py::arg("value"))
      .def("get", &config::Config::raw, py::arg("key"))
      .def("merge_file", [](config::Config& c, const std::string& p) { c.merge_file(p); }, py::arg("path"))
      .def("merge_text", &config::Config::merge_text, py::arg("text"), py::arg("origin") = "python")
      .def("dump", &config::Config::dump);

  py::class_<backbone::Model>(m, "Model")
      .def_property_readonly("num_classes", [](const backbone::Model& md) { return md.spec().num_classes; })
      .def_property_readonly("latent_dim", [](const backbone::Model& md) { return md.spec().latent_dim; })
      .def_property_readonly("input_size", [](const backbone::Model& md) { return md.spec().input_size; })
      .def("save", [](backbone::Model& md, const std::string& p) { pipeline::save_checkpoint(md, p); },
           py::arg("path"))
      .def(
          "infer",
          [](backbone::Model& md, const Array& images) {
            const auto t = pipeline::infer(md, to_tensor(images));
            py::dict d;
            d["z"] = to_array(t.z);
            d["logits"] = to_array(t.logits);
            py::list layers, maps;
            for (const auto& l : t.layer_logits) layers.append(to_array(l));
            for (const auto& s : t.spatial_maps) maps.append(to_array(s));
            d["layer_logits"] = layers;
            d["spatial_maps"] = maps;
            return d;
          },
          py::arg("images"), "Eval-mode forward on raw [0, 1] images (N, 3, H, W).")
      .def(
          "predict",
          [](backbone::Model& md, const Array& images) {
            return to_labels(pipeline::predict(md, to_tensor(images)));
          },
          py::arg("images"))
      .def(
          "evaluate",
          [](backbone::Model& md, const Array& images, const Labels& labels) {
            return metrics_dict(
                pipeline::evaluate(md, make_dataset(images, labels, md.spec().num_classes)));
          },
          py::arg("images"), py::arg("labels"))
      .def("head_bytes", [](const backbone::Model& md) {
        const auto b = pipeline::head_bytes(md);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      });

  m.def("load_checkpoint", [](const std::string& p) { return pipeline::load_checkpoint(p); }, py::arg("path"));

  m.def(
      "gen_domain_pair",
      [](const config::Config& c) {
        const auto pair = data::gen_domain_pair(c.domain_spec());
        py::dict d;
        d["source_images"] = to_array(pair.source.images);
        d["source_labels"] = to_labels(*pair.source.labels);
        d["target_images"] = to_array(pair.target.images);
        d["target_labels"] = to_labels(*pair.target.labels);
        d["class_names"] = pair.source.class_names;
        return d;
      },
      py::arg("config"), "Synthetic source/target glyph pair; images (N, 3, H, W) in [0, 1].");

  m.def(
      "pretrain",
      [](const config::Config& c, const Array& images, const Labels& labels) {
        const auto spec = c.block_spec();
        py::gil_scoped_release release;
        return pipeline::pretrain_source(make_dataset(images, labels, spec.num_classes), spec,
                                         c.pretrain_config());
      },
      py::arg("config"), py::arg("images"), py::arg("labels"));

  m.def(
      "adapt",
      [](const backbone::Model& source, const config::Config& c, const Array& images,
         const std::string& metrics_csv) {
        pipeline::RunOptions o;
        o.metrics_csv = metrics_csv;
        auto target = make_dataset(images, std::nullopt, source.spec().num_classes);
        py::gil_scoped_release release;
        return pipeline::adapt(source, target, c.adapt_config(), o);
      },
      py::arg("source"), py::arg("config"), py::arg("images"), py::arg("metrics_csv") = "",
      "Adapts a copy of `source` to unlabeled target images; the head stays frozen.");

  m.def(
      "im_loss", [](const Array& logits) { return losses::im_loss(to_tensor(logits)).value; }, py::arg("logits"));

  m.def(
      "gac_loss",
      [](const Array& globals, const Array& locals, const Labels& indices, const Array& bank_globals,
         double tau) {
        const Tensor bg = to_tensor(bank_globals);
        contrast::MemoryBank bank(bg.dim(0), bg.dim(1));
        std::vector<std::size_t> all(bg.dim(0));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        bank.update(all, bg, bg);
        return contrast::gac_loss(to_tensor(globals), to_tensor(locals), from_labels(indices), bank, tau).value;
      },
      py::arg("globals"), py::arg("locals"), py::arg("indices"), py::arg("bank_globals"), py::arg("tau") = 0.07);

  m.def(
      "cli", [](const std::vector<std::string>& args) { return cli::run(args); }, py::arg("args"),
      "Runs one arfnet subcommand in-process and returns its exit code.");
}
