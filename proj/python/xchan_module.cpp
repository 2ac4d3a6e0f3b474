#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xchan/analysis.hpp"
#include "xchan/corpus.hpp"
#include "xchan/errors.hpp"
#include "xchan/gptscore.hpp"
#include "xchan/mi_estimators.hpp"
#include "xchan/silver_labels.hpp"
#include "xchan/synthetic.hpp"
#include "xchan/v_information.hpp"

namespace py = pybind11;
using namespace xchan;

namespace {

PairedData paired(const Matrix& xs, const Matrix& es) {
  PairedData d{xs, es, {}};
  for (Eigen::Index i = 0; i < xs.rows(); ++i) d.ids.push_back(std::to_string(i));
  d.validate();
  return d;
}

py::dict estimate_dict(const MiEstimate& est) {
  std::vector<double> pointwise;
  std::vector<std::string> ids;
  for (const auto& p : est.pointwise) {
    ids.push_back(p.id);
    pointwise.push_back(p.nats);
  }
  py::dict d;
  d["dataset_nats"] = est.dataset_nats;
  d["batch_estimates"] = est.batch_estimates;
  d["pointwise"] = pointwise;
  d["ids"] = ids;
  d["batch_size"] = est.batch_size;
  return d;
}

}  // namespace

PYBIND11_MODULE(_xchan, m) {
  m.doc() = "Information-theoretic scores for text explanations";

  // Translators run newest first, so the specific types are registered
  // after the base class.
  const auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<MissingArtifact>(m, "MissingArtifact", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<TransportError>(m, "TransportError", base);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidInput& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  // corpus
  m.def("build_nle_prompt", [](const std::string& premise, const std::string& hypothesis, const std::string& label) {
    ExplanationRecord r;
    r.premise = premise;
    r.hypothesis = hypothesis;
    const auto l = parse_label(label);
    if (!l) throw InvalidInput("unknown label '" + label + "'");
    r.label = *l;
    return build_nle_prompt(r);
  });
  m.def("render_rationale", &render_rationale, py::arg("tokens"), py::arg("keep_mask"));

  // silver labels
  m.def("tokenize", &tokenize);
  m.def("type_overlap_ratio", &type_overlap_ratio, py::arg("input_text"), py::arg("explanan"));
  m.def(
      "edit_distance_ratio",
      [](const std::string& input, const std::string& explanan, bool character) {
        return edit_distance_ratio(input, explanan, character ? EditUnit::character : EditUnit::token);
      },
      py::arg("input_text"), py::arg("explanan"), py::arg("character") = false);
  m.def(
      "cosine_similarity",
      [](const std::vector<double>& x, const std::vector<double>& e) {
        return cosine_similarity(std::span<const double>(x), std::span<const double>(e));
      },
      py::arg("x"), py::arg("e"));

  // synthetic Gaussians
  m.def("rho_for_mi", &rho_for_mi, py::arg("mi"), py::arg("dim"));
  m.def("gaussian_mi", &gaussian_mi, py::arg("rho"), py::arg("dim"));
  m.def(
      "sample_correlated_gaussians",
      [](Eigen::Index dim, double mi, std::size_t n, std::uint64_t seed) {
        const auto d = sample_scenario({dim, mi, n, seed});
        return py::make_tuple(d.xs, d.es);
      },
      py::arg("dim"), py::arg("mi"), py::arg("n"), py::arg("seed"));

  // InfoNCE
  m.def(
      "infonce_estimate",
      [](const Matrix& xs, const Matrix& es, const Matrix& weight, std::size_t batch_size) {
        const auto batches = make_batches(paired(xs, es), batch_size);
        return estimate_dict(infonce_estimate(batches, BilinearCritic{weight}));
      },
      py::arg("xs"), py::arg("es"), py::arg("weight"), py::arg("batch_size"));
  m.def(
      "train_infonce",
      [](const Matrix& xs, const Matrix& es, const Matrix& val_xs, const Matrix& val_es, double lr,
         std::size_t batch_size, int epochs, std::uint64_t seed) {
        const auto t = train_infonce(paired(xs, es), paired(val_xs, val_es), {lr, batch_size, epochs, 0}, seed);
        py::dict d;
        d["weight"] = t.critic.weight;
        d["train_history"] = t.train_history;
        d["validation_history"] = t.validation_history;
        d["best_validation_loss"] = t.best_validation_loss;
        return d;
      },
      py::arg("xs"), py::arg("es"), py::arg("val_xs"), py::arg("val_es"), py::arg("lr") = 1e-4,
      py::arg("batch_size") = 64, py::arg("epochs") = 10, py::arg("seed") = 0);

  // V-information
  m.def(
      "v_information",
      [](const Matrix& train_e, const std::vector<int>& train_y, const Matrix& val_e, const std::vector<int>& val_y,
         const Matrix& test_e, const std::vector<int>& test_y, double lr, std::size_t batch_size, int epochs,
         std::uint64_t seed) {
        const PredictorConfig cfg{lr, batch_size, epochs};
        const auto null = make_null_input(derive_seed(seed, 1), train_e.cols());
        const auto null_fit = fit_predictor(null_design(null, train_e.rows()), train_y,
                                            null_design(null, val_e.rows()), val_y, cfg, derive_seed(seed, 2));
        const auto cond_fit = fit_predictor(train_e, train_y, val_e, val_y, cfg, derive_seed(seed, 3));
        std::vector<std::string> ids;
        for (Eigen::Index i = 0; i < test_e.rows(); ++i) ids.push_back(std::to_string(i));
        const auto est =
            v_information(null_fit.model, cond_fit.model, test_y, null_design(null, test_e.rows()), test_e, ids);
        std::vector<double> pvi;
        for (const auto& p : est.pointwise) pvi.push_back(p.nats);
        py::dict d;
        d["h_entropy"] = est.h_entropy;
        d["h_conditional"] = est.h_conditional;
        d["v_information"] = est.v_information;
        d["pointwise"] = pvi;
        return d;
      },
      py::arg("train_e"), py::arg("train_y"), py::arg("val_e"), py::arg("val_y"), py::arg("test_e"),
      py::arg("test_y"), py::arg("lr") = 1e-3, py::arg("batch_size") = 8, py::arg("epochs") = 10,
      py::arg("seed") = 0);

  // GPTScore
  m.def("evaluation_items", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& item : evaluation_items()) out.emplace_back(item.name, item.statement);
    return out;
  });
  m.def(
      "build_gptscore_prompt",
      [](const std::string& premise, const std::string& hypothesis, const std::string& label,
         const std::string& explanan, const std::string& item) {
        ExplanationRecord r;
        r.premise = premise;
        r.hypothesis = hypothesis;
        const auto l = parse_label(label);
        if (!l) throw InvalidInput("unknown label '" + label + "'");
        r.label = *l;
        r.explanan = explanan;
        return build_gptscore_prompt(r, evaluation_item(item));
      },
      py::arg("premise"), py::arg("hypothesis"), py::arg("label"), py::arg("explanan"), py::arg("item"));
  m.def("parse_likert", [](const std::string& raw) { return parse_likert(raw).numeric(); });

  // statistics
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = spearman(x, y);
    return py::make_tuple(r.rho, r.p, r.defined);
  });
  m.def(
      "explained_variance",
      [](const std::vector<double>& target, const std::vector<std::vector<double>>& features) {
        const auto r = explained_variance(target, features);
        return py::make_tuple(r.percent, r.rank_deficient);
      },
      py::arg("target"), py::arg("features"));
  m.def(
      "paired_ttest",
      [](const std::vector<double>& a, const std::vector<double>& b, std::size_t comparisons, bool welch) {
        const auto r = paired_ttest_bonferroni(a, b, comparisons, welch ? TTestKind::welch : TTestKind::paired);
        py::dict d;
        d["t"] = r.t;
        d["dof"] = r.dof;
        d["raw_p"] = r.raw_p;
        d["adj_p"] = r.adj_p;
        d["zero_variance"] = r.zero_variance;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("comparisons") = 1, py::arg("welch") = false);
  m.def("silhouette", [](const std::vector<std::array<double, 2>>& points, const std::vector<int>& labels) {
    return silhouette(points, labels);
  });
  m.def("student_t_cdf", &student_t_cdf, py::arg("t"), py::arg("dof"));
}
