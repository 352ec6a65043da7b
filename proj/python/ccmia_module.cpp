// Python bindings for the main ccmia operations.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ccmia/defense.hpp"
#include "ccmia/eavesdrop.hpp"
#include "ccmia/experiment.hpp"
#include "ccmia/federation.hpp"
#include "ccmia/gnn.hpp"
#include "ccmia/graph.hpp"
#include "ccmia/inversion.hpp"
#include "ccmia/membership.hpp"
#include "ccmia/metrics.hpp"
#include "ccmia/partition.hpp"
#include "ccmia/prototypes.hpp"

namespace py = pybind11;
using namespace ccmia;

PYBIND11_MODULE(_ccmia, m) {
  m.doc() = "Federated GNN attack simulator: graphs, federation, attacks, metrics";

  py::register_exception<Error>(m, "CcmiaError");

  py::enum_<PropagationMode>(m, "PropagationMode")
      .value("sym_norm_adj_self_loops", PropagationMode::sym_norm_adj_self_loops)
      .value("normalized_laplacian", PropagationMode::normalized_laplacian);

  py::class_<Graph>(m, "Graph")
      .def(py::init<>())
      .def_readwrite("num_nodes", &Graph::num_nodes)
      .def_readwrite("num_features", &Graph::num_features)
      .def_readwrite("num_classes", &Graph::num_classes)
      .def_readwrite("features", &Graph::features)
      .def_readwrite("edges", &Graph::edges)
      .def_readwrite("labels", &Graph::labels)
      .def_readwrite("train_mask", &Graph::train_mask)
      .def_readwrite("val_mask", &Graph::val_mask)
      .def_readwrite("test_mask", &Graph::test_mask);

  py::class_<SbmParams>(m, "SbmParams")
      .def(py::init<>())
      .def_readwrite("blocks", &SbmParams::blocks)
      .def_readwrite("p_in", &SbmParams::p_in)
      .def_readwrite("p_out", &SbmParams::p_out)
      .def_readwrite("feature_centers", &SbmParams::feature_centers)
      .def_readwrite("feature_noise", &SbmParams::feature_noise);

  m.def("gen_sbm", &gen_sbm, py::arg("params"), py::arg("seed"));
  m.def("assign_split_masks", &assign_split_masks, py::arg("graph"),
        py::arg("train_frac"), py::arg("val_frac"), py::arg("seed"));
  m.def("load_bundle", &load_bundle, py::arg("dir"));
  m.def("save_bundle", &save_bundle, py::arg("graph"), py::arg("dir"));
  m.def("propagation_matrix", &propagation_matrix, py::arg("graph"), py::arg("mode"));
  m.def("validate_graph", &validate, py::arg("graph"));

  py::class_<Partition>(m, "Partition")
      .def_readonly("K", &Partition::K)
      .def_readonly("assignment", &Partition::assignment)
      .def_readonly("subgraphs", &Partition::subgraphs)
      .def_readonly("local_to_global", &Partition::local_to_global);

  m.def(
      "partition",
      [](const Graph& g, int k, double tol, std::uint64_t seed) {
        return partition(g, k, tol, seed);
      },
      py::arg("graph"), py::arg("k"), py::arg("balance_tol"), py::arg("seed"));
  m.def("edge_cut", &edge_cut, py::arg("graph"), py::arg("partition"));
  m.def("class_distribution", &class_distribution, py::arg("partition"));

  py::class_<ModelParams>(m, "ModelParams")
      .def_readwrite("W1", &ModelParams::W1)
      .def_readwrite("b1", &ModelParams::b1)
      .def_readwrite("W2", &ModelParams::W2)
      .def_readwrite("b2", &ModelParams::b2)
      .def_readwrite("mode", &ModelParams::mode)
      .def_readwrite("hidden", &ModelParams::hidden);

  py::class_<Gradients>(m, "Gradients")
      .def_readwrite("W1", &Gradients::W1)
      .def_readwrite("b1", &Gradients::b1)
      .def_readwrite("W2", &Gradients::W2)
      .def_readwrite("b2", &Gradients::b2);

  m.def("init_params", &init_params, py::arg("num_features"), py::arg("hidden"),
        py::arg("num_classes"), py::arg("mode"), py::arg("seed"));
  m.def(
      "forward",
      [](const ModelParams& p, const Graph& g) {
        ForwardResult r = forward(p, g);
        return py::make_tuple(r.first_layer, r.logits, r.probs);
      },
      py::arg("params"), py::arg("graph"));
  m.def("first_layer_embedding", &first_layer_embedding, py::arg("params"),
        py::arg("graph"));
  m.def(
      "loss_and_grads",
      [](const ModelParams& p, const Graph& g, const Mask& mask) {
        LossGrads lg = loss_and_grads(p, g, mask);
        return py::make_tuple(lg.loss, lg.grads);
      },
      py::arg("params"), py::arg("graph"), py::arg("mask"));
  m.def("grad_check", &grad_check, py::arg("params"), py::arg("graph"),
        py::arg("mask"), py::arg("eps"));
  m.def("accuracy", &accuracy, py::arg("params"), py::arg("graph"), py::arg("mask"));

  py::enum_<Strategy>(m, "Strategy")
      .value("fedavg", Strategy::fedavg)
      .value("fedprox", Strategy::fedprox)
      .value("scaffold", Strategy::scaffold)
      .value("fednova", Strategy::fednova)
      .value("feddf_simplified", Strategy::feddf_simplified);

  py::class_<FedConfig>(m, "FedConfig")
      .def(py::init<>())
      .def_readwrite("strategy", &FedConfig::strategy)
      .def_readwrite("rounds", &FedConfig::rounds)
      .def_readwrite("local_steps", &FedConfig::local_steps)
      .def_readwrite("lr", &FedConfig::lr)
      .def_readwrite("momentum", &FedConfig::momentum)
      .def_readwrite("weight_decay", &FedConfig::weight_decay)
      .def_readwrite("prox_mu", &FedConfig::prox_mu)
      .def_readwrite("seed", &FedConfig::seed)
      .def_readwrite("hidden", &FedConfig::hidden)
      .def_readwrite("mode", &FedConfig::mode);

  py::class_<RoundRecord>(m, "RoundRecord")
      .def_readonly("round", &RoundRecord::round)
      .def_readonly("global_params", &RoundRecord::global)
      .def_readonly("uploads", &RoundRecord::uploads);

  py::class_<FederationResult>(m, "FederationResult")
      .def_readonly("params", &FederationResult::params)
      .def_readonly("records", &FederationResult::records);

  m.def(
      "run_federation",
      [](const std::vector<Graph>& clients, const FedConfig& cfg) {
        return run_federation(clients, cfg);
      },
      py::arg("clients"), py::arg("config"));

  m.def("auc", &auc, py::arg("scores"), py::arg("labels"));
  m.def("auc_rank", &auc_rank, py::arg("scores"), py::arg("labels"));
  m.def("rnmse",
        py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&>(&rnmse),
        py::arg("x"), py::arg("x_hat"));
  m.def("edge_auc", &edge_auc, py::arg("true_adj"), py::arg("a_cont"));

  py::class_<InversionConfig>(m, "InversionConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &InversionConfig::alpha)
      .def_readwrite("beta", &InversionConfig::beta)
      .def_readwrite("epochs", &InversionConfig::epochs)
      .def_readwrite("lr_x", &InversionConfig::lr_x)
      .def_readwrite("lr_a", &InversionConfig::lr_a)
      .def_readwrite("rho", &InversionConfig::rho)
      .def_readwrite("n_nodes", &InversionConfig::n_nodes)
      .def_readwrite("seed", &InversionConfig::seed);

  py::class_<Reconstruction>(m, "Reconstruction")
      .def_readonly("X", &Reconstruction::X)
      .def_readonly("A_cont", &Reconstruction::A_cont)
      .def_readonly("A_bin", &Reconstruction::A_bin)
      .def_readonly("labels", &Reconstruction::labels);

  m.def("cosine_grad_loss", &cosine_grad_loss, py::arg("g_true"), py::arg("g_syn"));
  m.def("smoothness", &smoothness, py::arg("X"), py::arg("A"));
  m.def("project_unit_interval", &project_unit_interval, py::arg("a"));
  m.def("sample_top_edges", &sample_top_edges, py::arg("a_cont"), py::arg("n_edges"));
  m.def("invert", &invert, py::arg("global_params"), py::arg("g_true_w1"),
        py::arg("labels"), py::arg("config"));
  m.def("reconstruction_to_graph", &reconstruction_to_graph, py::arg("rec"),
        py::arg("num_classes"));

  py::class_<PrototypeSet>(m, "PrototypeSet")
      .def_readonly("by_client", &PrototypeSet::by_client);
  m.def("build_prototypes", &build_prototypes, py::arg("global_params"),
        py::arg("recon_graphs"));
  py::class_<OwnerAssignment>(m, "OwnerAssignment")
      .def_readonly("client", &OwnerAssignment::client)
      .def_readonly("distances", &OwnerAssignment::distances);
  m.def("assign_owner", &assign_owner, py::arg("global_params"), py::arg("target"),
        py::arg("node"), py::arg("prototypes"));
  m.def("assign_owners", &assign_owners, py::arg("global_params"), py::arg("target"),
        py::arg("nodes"), py::arg("prototypes"));
  m.def("ownership_accuracy", &ownership_accuracy, py::arg("predicted"),
        py::arg("truth"));
  m.def("structural_similarity_kl", &structural_similarity_kl, py::arg("g_inv"),
        py::arg("g_shadow"), py::arg("bins"), py::arg("eps"));

  py::class_<DefenseConfig>(m, "DefenseConfig")
      .def(py::init<>())
      .def_readwrite("eta", &DefenseConfig::eta)
      .def_readwrite("seed", &DefenseConfig::seed);
  m.def("perturb_features", &perturb_features, py::arg("X"), py::arg("config"));

  py::class_<GnnTrainConfig>(m, "GnnTrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &GnnTrainConfig::epochs)
      .def_readwrite("lr", &GnnTrainConfig::lr)
      .def_readwrite("hidden", &GnnTrainConfig::hidden)
      .def_readwrite("mode", &GnnTrainConfig::mode);

  py::class_<MlpConfig>(m, "MlpConfig")
      .def(py::init<>())
      .def_readwrite("hidden_layers", &MlpConfig::hidden_layers)
      .def_readwrite("width", &MlpConfig::width)
      .def_readwrite("keep_prob", &MlpConfig::keep_prob)
      .def_readwrite("batchnorm", &MlpConfig::batchnorm)
      .def_readwrite("lr", &MlpConfig::lr)
      .def_readwrite("steps", &MlpConfig::steps);

  py::class_<AttackDataset>(m, "AttackDataset")
      .def(py::init<>())
      .def_readwrite("embeddings", &AttackDataset::embeddings)
      .def_readwrite("member", &AttackDataset::member);

  py::class_<MlpParams>(m, "MlpParams");

  m.def("member_split", &member_split, py::arg("num_nodes"), py::arg("frac"),
        py::arg("seed"));
  m.def("train_attacker_gnn", &train_attacker_gnn, py::arg("shadow"),
        py::arg("train_fraction"), py::arg("config"), py::arg("seed"),
        py::arg("warm_start") = nullptr);
  m.def("build_attack_dataset", &build_attack_dataset, py::arg("attacker"),
        py::arg("shadow"), py::arg("member"));
  m.def("train_mlp", &train_mlp, py::arg("dataset"), py::arg("config"), py::arg("seed"));
  m.def("mlp_scores", &mlp_scores, py::arg("params"), py::arg("X"));
  m.def("infer_membership", &infer_membership, py::arg("classifier"),
        py::arg("global_params"), py::arg("target"), py::arg("nodes"));

  m.attr("__version__") = "0.1.0";
}
