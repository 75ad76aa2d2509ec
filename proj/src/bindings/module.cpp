#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ltnvae/metrics.hpp"
#include "ltnvae/real_logic.hpp"
#include "ltnvae/reasoner.hpp"
#include "ltnvae/synthetic.hpp"
#include "ltnvae/vae.hpp"

namespace py = pybind11;
using namespace ltnvae;

namespace {

std::vector<double> truth_values(const logic::TruthTensor& t) { return t.values; }

py::array_t<float> image_to_array(const ImageTensor& img) {
  py::array_t<float> a({img.height, img.width, img.channels});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_ltnvae, m) {
  m.doc() = "Fuzzy-logic VAE primitives: real-logic operators, KL predicates, "
            "k-means/GMM reasoning and evaluation metrics";

  // ---- real logic ----
  m.def("negate", [](const std::vector<double>& a) {
    return truth_values(logic::negate(logic::TruthTensor(a)));
  });
  m.def("tnorm", [](const std::vector<double>& a, const std::vector<double>& b) {
    return truth_values(logic::tnorm(logic::TruthTensor(a), logic::TruthTensor(b)));
  });
  m.def("tconorm", [](const std::vector<double>& a, const std::vector<double>& b) {
    return truth_values(logic::tconorm(logic::TruthTensor(a), logic::TruthTensor(b)));
  });
  m.def("implies", [](const std::vector<double>& a, const std::vector<double>& b) {
    return truth_values(logic::implies(logic::TruthTensor(a), logic::TruthTensor(b)));
  });
  m.def("exists", [](const std::vector<double>& a, double p) {
    return logic::exists(logic::TruthTensor(a), logic::AggregatorConfig(p));
  }, py::arg("a"), py::arg("p") = 2.0);
  m.def("forall", [](const std::vector<double>& a, double p) {
    return logic::forall(logic::TruthTensor(a), logic::AggregatorConfig(p));
  }, py::arg("a"), py::arg("p") = 2.0);
  m.def("batch_normalize", [](const std::vector<double>& raw) {
    return truth_values(logic::batch_normalize(raw));
  });

  // ---- latent predicates ----
  py::class_<LatentCode>(m, "LatentCode")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("mu"),
           py::arg("logvar"))
      .def_readonly("mu", &LatentCode::mu)
      .def_readonly("logvar", &LatentCode::logvar)
      .def("__len__", &LatentCode::size);
  m.def("klu", &klu, py::arg("code"), py::arg("dims"));
  m.def("klt", &klt, py::arg("a"), py::arg("b"), py::arg("dims"));
  m.def("project", &project, py::arg("code"), py::arg("dims"));

  // ---- reasoning ----
  py::class_<KmeansResult>(m, "KmeansResult")
      .def_readonly("centers", &KmeansResult::centers)
      .def_readonly("assignment", &KmeansResult::assignment)
      .def_readonly("inertia", &KmeansResult::inertia)
      .def_readonly("iterations", &KmeansResult::iterations);
  m.def("kmeans", &kmeans, py::arg("points"), py::arg("k"), py::arg("seed") = 0,
        py::arg("max_iters") = 100);

  py::class_<GmmComponent>(m, "GmmComponent")
      .def_readonly("center", &GmmComponent::center)
      .def_readonly("variance", &GmmComponent::variance)
      .def_readonly("weight", &GmmComponent::weight);
  m.def("fit_gmm", [](const std::vector<std::vector<double>>& points,
                      const KmeansResult& clusters) {
    return fit_gmm(points, clusters, nullptr);
  });

  py::class_<ReasonerModel>(m, "ReasonerModel")
      .def_readonly("factor", &ReasonerModel::factor)
      .def_readonly("dims", &ReasonerModel::dims)
      .def_readonly("tau", &ReasonerModel::tau)
      .def_readonly("components", &ReasonerModel::components)
      .def("score", &ReasonerModel::score)
      .def("density_at", &ReasonerModel::density_at)
      .def("is_ood", &ReasonerModel::is_ood)
      .def("to_json", &ReasonerModel::to_json)
      .def_static("from_json", &ReasonerModel::from_json)
      .def_static("load", &ReasonerModel::load);

  // ---- metrics ----
  m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return auroc(ScoredSet{scores, labels});
  }, py::arg("scores"), py::arg("labels"));
  m.def("mutual_information", &mutual_information, py::arg("labels"), py::arg("values"),
        py::arg("bins") = 20);

  // ---- synthetic data (single-sample rendering for quick exploration) ----
  m.def("render_sample", [](const std::string& streak, const std::string& scene,
                            std::uint64_t seed) {
    SyntheticConfig cfg;
    Rng rng(seed);
    return image_to_array(render_sample(cfg, streak, scene, rng));
  }, py::arg("streak"), py::arg("scene"), py::arg("seed") = 0);

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
}
