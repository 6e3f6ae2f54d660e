// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "bodykit/cascade.hpp"
#include "bodykit/cli.hpp"
#include "bodykit/codec.hpp"
#include "bodykit/dataset.hpp"
#include "bodykit/errors.hpp"
#include "bodykit/fitting.hpp"
#include "bodykit/metrics.hpp"
#include "bodykit/model_io.hpp"
#include "bodykit/objectives.hpp"
#include "bodykit/synthetic.hpp"
#include "bodykit/toy_model.hpp"
#include "procrustes_oracle.hpp"
#include "support.hpp"

using namespace bodykit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(budget_s)) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

// A handful of toy models: different seeds, some with shuffled axis orders.
std::vector<BodyModel> model_zoo() {
  std::vector<BodyModel> zoo;
  for (std::uint64_t seed : {42u, 7u, 1001u, 31337u, 5u}) {
    zoo.push_back(gen_toy_model(seed));
    zoo.push_back(permute_dof_order(zoo.back(), seed + 1));
  }
  return zoo;
}

// 1 -------------------------------------------------------------------------

Outcome gradients() {
  const auto zoo = model_zoo();
  double worst_mesh = 0.0, worst_evidence = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const BodyModel& m = zoo[static_cast<std::size_t>(draw) % zoo.size()];
    UniformSource rng(1000 + static_cast<std::uint64_t>(draw));
    const ParamLayout layout(m);
    const ParamSet truth = random_params(m, rng);
    ParamSet at = random_params(m, rng);
    // push some DOFs past their limits so the penalty term is exercised
    at.theta.values = support::random_pose(m, rng, 1.3);

    const Mesh target = posed_skin(m, truth);
    auto mesh_obj = make_objective([&](auto x) {
      using T = typename decltype(x)::value_type;
      return mesh_distance_t<T>(m, layout.theta(x), layout.beta(x), target.vertices, 10.0);
    });
    const Evidence ev = render_evidence(m, truth, default_intrinsics(640, 480), true);
    const CascadeSettings settings;
    auto ev_obj = make_objective([&](auto x) {
      using T = typename decltype(x)::value_type;
      return evidence_objective_t<T>(m, ev, layout, x, settings);
    });

    const auto x = layout.flatten(at);
    for (int which = 0; which < 2; ++which) {
      const Objective& f = which == 0 ? static_cast<const Objective&>(mesh_obj) : ev_obj;
      const auto ad = gradient(f, x);
      const auto fd = gradient(f, x, GradientMode::CentralFD);
      // mesh_distance ignores the camera entries
      const std::size_t n = which == 0 ? layout.pi_offset() : x.size();
      double& worst = which == 0 ? worst_mesh : worst_evidence;
      // central FD carries ~eps*|f|/h of roundoff, so near-zero components are
      // measured against a floor that scales with the objective value
      const double floor = 1e-5 * std::max(1.0, std::abs(ad.value));
      for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, support::gradient_rel_error(ad.gradient[i], fd.gradient[i], floor));
    }
  }
  const double worst = std::max(worst_mesh, worst_evidence);
  return {worst < 1e-4, fmt("max relative error %.2e (mesh_distance %.2e, evidence %.2e), limit 1e-4", worst,
                            worst_mesh, worst_evidence)};
}

// 2 -------------------------------------------------------------------------

// Independent posing of one vertex through 4x4 matrices.
Vec3d oracle_vertex(const BodyModel& m, const std::vector<double>& theta, const std::vector<Vec3d>& rest_joints,
                    const Vec3d& rest, std::size_t joint) {
  const std::size_t J = m.num_joints();
  std::vector<support::H4> g(J);
  for (std::size_t j = 0; j < J; ++j) {
    support::M3 r = support::eye3();
    for (std::size_t a = 0; a < m.dofs()[j].axes.size(); ++a)
      r = support::mul(r, support::r_axis(m.dofs()[j].axes[a], theta[m.dof_offset(j) + a]));
    const int p = m.parents()[j];
    const Vec3d offset = p < 0 ? rest_joints[j] : rest_joints[j] - rest_joints[static_cast<std::size_t>(p)];
    const auto local = support::homog(r, offset);
    g[j] = p < 0 ? local : support::hmul(g[static_cast<std::size_t>(p)], local);
  }
  return support::happly(g[joint], rest - rest_joints[joint]);
}

Outcome fk_invariants() {
  const auto zoo = model_zoo();
  std::size_t identity_bad = 0, rigid_bad = 0, rigid_checked = 0;
  double equivariance = 0.0, oracle = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const BodyModel& m = zoo[static_cast<std::size_t>(c) % zoo.size()];
    UniformSource rng(2000 + static_cast<std::uint64_t>(c));
    ShapeVector beta{std::vector<double>(m.shape_dim())};
    for (auto& b : beta.values) b = rng.normal();
    const RestShape rest = shape_blend(m, beta);

    // zero pose: everything stays exactly at rest
    const FkResult zero = forward_kinematics(m, PoseVector{std::vector<double>(m.pose_dim(), 0.0)}, beta);
    const Mesh zs = skin(m, zero, rest.rest_skin, Layer::Skin);
    for (std::size_t v = 0; v < zs.vertices.size(); ++v) identity_bad += !(zs.vertices[v] == rest.rest_skin.vertices[v]);
    for (std::size_t j = 0; j < m.num_joints(); ++j) identity_bad += !(zero.posed_joints[j] == rest.rest_joints[j]);
    if (m.has_skeleton()) {
      const Mesh rk = rest_skeleton(m, rest.rest_joints);
      const Mesh zk = skin(m, zero, rk, Layer::Skeleton);
      for (std::size_t v = 0; v < zk.vertices.size(); ++v) identity_bad += !(zk.vertices[v] == rk.vertices[v]);
    }

    // rotating the root rotates the whole body about the root joint
    const PoseVector pose{support::random_pose(m, rng)};
    const FkResult fk = forward_kinematics(m, pose, beta);
    const Mesh posed = skin(m, fk, rest.rest_skin, Layer::Skin);
    const Mat3d q = axis_angle_to_matrix(rng.uniform(0, 3.1) * support::random_unit(rng));
    std::array<Axis, 3> order{};
    for (std::size_t a = 0; a < 3; ++a) order[a] = m.dofs()[0].axes[a];
    const Vec3d root_euler = matrix_to_euler(order, q * pose_to_rotations(m, pose)[0]);
    PoseVector turned = pose;
    for (int a = 0; a < 3; ++a) turned.values[static_cast<std::size_t>(a)] = root_euler[a];
    const FkResult fk2 = forward_kinematics(m, turned, beta);
    const Mesh posed2 = skin(m, fk2, rest.rest_skin, Layer::Skin);
    const Vec3d root = rest.rest_joints[0];
    for (std::size_t v = 0; v < posed.vertices.size(); ++v)
      equivariance = std::max(equivariance, norm(posed2.vertices[v] - (root + q * (posed.vertices[v] - root))));
    for (std::size_t j = 0; j < m.num_joints(); ++j)
      equivariance = std::max(equivariance, norm(fk2.posed_joints[j] - (root + q * (fk.posed_joints[j] - root))));

    // single unit weight: exactly the bone's rigid map, and matches the oracle
    const auto bones = fk.bone_transforms();
    const auto& w = m.data().skin_weights;
    for (std::size_t v = 0; v < w.rows(); ++v) {
      if (w.offsets[v + 1] - w.offsets[v] != 1 || w.values[w.offsets[v]] != 1.0) continue;
      const std::size_t j = w.cols[w.offsets[v]];
      ++rigid_checked;
      rigid_bad += !(posed.vertices[v] == bones[j].apply(rest.rest_skin.vertices[v]));
      if (v % 7 == 0)
        oracle = std::max(oracle, norm(posed.vertices[v] - oracle_vertex(m, pose.values, rest.rest_joints,
                                                                        rest.rest_skin.vertices[v], j)));
    }
  }
  const bool ok = identity_bad == 0 && equivariance < 1e-9 && rigid_checked > 0 && rigid_bad == 0 && oracle < 1e-12;
  return {ok, fmt("zero-pose mismatches %zu; root equivariance %.2e (< 1e-9); unit-weight vertices %zu checked, "
                  "%zu not rigid, oracle gap %.2e",
                  identity_bad, equivariance, rigid_checked, rigid_bad, oracle)};
}

// 3 -------------------------------------------------------------------------

Outcome procrustes() {
  double worst_rel = 0.0;
  std::size_t beaten = 0;
  for (int inst = 0; inst < 200; ++inst) {
    UniformSource rng(3000 + static_cast<std::uint64_t>(inst));
    const std::size_t n = 14 + rng.index(20);
    std::vector<Vec3d> g(n), p(n);
    for (auto& v : g) v = {0.3 * rng.normal(), 0.5 * rng.normal(), 0.2 * rng.normal()};
    const double s = rng.uniform(0.3, 3.0);
    const Mat3d r = axis_angle_to_matrix(rng.uniform(0, 3.1) * support::random_unit(rng));
    const Vec3d t{rng.normal(), rng.normal(), rng.normal()};
    const double noise = inst % 2 ? 0.01 : 0.05;
    for (std::size_t i = 0; i < n; ++i)
      p[i] = s * (r * g[i]) + t + Vec3d{noise * rng.normal(), noise * rng.normal(), noise * rng.normal()};

    const JointSet3D pj(p), gj(g);
    const double pa = pa_mpjpe(pj, gj);
    const auto fit = support::oracle_similarity(p, g, rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += support::dist(fit.apply(p[i]), g[i]);
    ref *= kMetersToMillimeters / static_cast<double>(n);
    worst_rel = std::max(worst_rel, std::abs(pa - ref) / ref);

    const auto best = procrustes_align(pj, gj).transform;
    const double floor = squared_residual(pj, gj, best);
    for (int k = 0; k < 10000; ++k) {
      SimilarityTransform q = best;
      if (k % 10 == 0) {
        // anywhere
        q.scale = rng.uniform(0.1, 5.0);
        q.rotation = axis_angle_to_matrix(rng.uniform(0, 3.14) * support::random_unit(rng));
        q.translation = {rng.normal(), rng.normal(), rng.normal()};
      } else {
        // near the optimum, radius log-uniform in [1e-4, 1]
        const double rad = std::pow(10.0, rng.uniform(-4, 0));
        q.scale *= std::exp(rad * rng.normal() * 0.3);
        q.rotation = axis_angle_to_matrix(rad * rng.uniform(0, 1) * support::random_unit(rng)) * q.rotation;
        q.translation = q.translation + rad * rng.uniform(0, 0.3) * support::random_unit(rng);
      }
      beaten += squared_residual(pj, gj, q) < floor;
    }
  }
  return {worst_rel < 1e-6 && beaten == 0,
          fmt("max relative gap to the numeric oracle %.2e (< 1e-6); %zu of 2,000,000 sampled similarities beat "
              "the alignment",
              worst_rel, beaten)};
}

// 4 -------------------------------------------------------------------------

Outcome loss_algebra() {
  double worst = 0.0;
  UniformSource rng(4000);
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2, 2);
    return v;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 5 + rng.index(20);
    std::vector<Vec3d> j3(K);
    std::vector<Vec2d> j2(K);
    std::vector<double> vis(K);
    for (std::size_t k = 0; k < K; ++k) {
      j3[k] = {rng.normal(), rng.normal(), rng.normal()};
      j2[k] = {rng.uniform(0, 1000), rng.uniform(0, 1000)};
      vis[k] = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.1, 1.0);
    }
    Prediction pred{PoseVector{vec(46)}, ShapeVector{vec(10)}, JointSet3D(j3, vis), JointSet2D(j2, vis)};
    Supervision sup;
    sup.theta_hat = pred.theta;
    sup.beta_hat = pred.beta;
    sup.j3d_hat = pred.j3d;
    sup.j2d_hat = pred.j2d;
    sup.image_extent = 1000;
    LossWeights w{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};

    // zero at ground truth
    const auto at_gt = loss_skel(pred, sup, w);
    worst = std::max({worst, std::abs(at_gt.total), std::abs(at_gt.kp), std::abs(at_gt.beta), std::abs(at_gt.theta)});
    std::vector<PoseVector> stages(1 + rng.index(8), pred.theta);
    worst = std::max(worst, std::abs(loss_refine(stages, pred.theta)));
    worst = std::max(worst, std::abs(loss_total(at_gt.total, at_gt.total, loss_refine(stages, pred.theta), w)));

    // refine = sum of per-stage pose losses
    for (auto& s : stages) s.values = vec(46);
    double sum = 0.0;
    for (const auto& s : stages) sum += loss_params(s, pred.theta, pred.beta, pred.beta).theta;
    const double refine = loss_refine(stages, pred.theta);
    worst = std::max(worst, std::abs(refine - sum));

    // total is affine in lambda_ref with slope L_refine
    const double enc = rng.uniform(0, 3), dec = rng.uniform(0, 3);
    LossWeights w2 = w;
    w2.refine = w.refine + rng.uniform(0, 1);
    LossWeights w0 = w;
    w0.refine = 0.0;
    worst = std::max(worst, std::abs(loss_total(enc, dec, refine, w0) - (enc + dec)));
    worst = std::max(worst, std::abs((loss_total(enc, dec, refine, w2) - loss_total(enc, dec, refine, w)) -
                                     (w2.refine - w.refine) * refine));
  }
  return {worst <= 1e-12, fmt("largest deviation %.2e over 1000 random trials (limit 1e-12)", worst)};
}

// 5 -------------------------------------------------------------------------

Outcome round_trip() {
  const BodyModel base = gen_toy_model(42);
  const BodyModel source = ball_joint_variant(base, "source");
  const BodyModel target = permute_dof_order(base, 7);
  Dataset ds;
  ds.manifest.sequences["seq"] = 100;
  for (int i = 0; i < 100; ++i) {
    UniformSource rng(100 + static_cast<std::uint64_t>(i));
    const ParamSet truth = random_params(target, rng);
    const AxisAnglePose aa = to_axis_angle_pose(target, truth.theta);
    SampleRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.image_width = 640;
    r.image_height = 480;
    r.sequence_id = "seq";
    r.frame = static_cast<std::size_t>(i);
    r.source = SourceParams{"source", aa.body, truth.beta.values, aa.global_orient};
    ds.records.push_back(std::move(r));
  }
  ds.sync_count();
  ConvertOptions opt;
  opt.workers = std::max(1u, std::thread::hardware_concurrency());
  const ConvertResult res = convert_dataset(ds, source, target, FitSchedule::defaults(), opt);

  std::size_t good = 0, freeze_bad = 0, with_params = 0;
  for (const auto& rep : res.reports) good += rep.pve && *rep.pve < 1e-3;
  for (const auto& r : res.converted.records) {
    ++with_params;
    const Vec3d expected = axis_angle_to_euler(target, r.source->global_orient);
    for (int a = 0; a < 3; ++a)
      freeze_bad += !same_bits(r.target->theta.values[target.dof_offset(0) + static_cast<std::size_t>(a)], expected[a]);
  }
  return {good >= 95 && freeze_bad == 0 && with_params > 0,
          fmt("%zu/100 samples under 1e-3 PVE (need 95); global orientation bitwise frozen on %zu/%zu converted",
              good, with_params - freeze_bad, with_params)};
}

// 6, 7 ----------------------------------------------------------------------

Evidence oracle_evidence(const BodyModel& m, std::uint64_t seed) {
  UniformSource rng(seed);
  return render_evidence(m, random_params(m, rng), default_intrinsics(640, 480), true);
}

Outcome cascade_closed_loop() {
  const BodyModel m = gen_toy_model(42);
  std::size_t hits = 0, monotone = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Evidence ev = oracle_evidence(m, 5000 + s);
    const CascadeTrace t = run_cascade(ev, m);
    bool mono = t.stages.size() == 7;
    for (std::size_t i = 1; i < t.stages.size(); ++i) mono &= t.stages[i].objective <= t.stages[i - 1].objective;
    monotone += mono;
    hits += evidence_pck(m, ev, t.stages.back().params).at_005 == 1.0;
  }
  return {hits == 50 && monotone == 50,
          fmt("PCK@0.05 = 1 on %zu/50 seeds, non-increasing 7-entry trace on %zu/50 (L = 6)", hits, monotone)};
}

Outcome probe() {
  const BodyModel m = gen_toy_model(42);
  CascadeSettings converged;
  converged.steps_per_stage = 100;
  std::size_t dips = 0, last_mismatch = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Evidence ev = oracle_evidence(m, 5000 + s);
    const CascadeTrace t = run_cascade(ev, m, converged);
    const PckPair final_pck = evidence_pck(m, ev, t.stages.back().params);
    for (auto c : {ProbeComponent::Scale, ProbeComponent::PlaneTranslation}) {
      PckPair prev{-1.0, -1.0};
      for (std::size_t layer = 0; layer <= t.num_layers(); ++layer) {
        const PckPair cur = factorization_probe(t, ev, m, c, layer);
        dips += cur.at_005 < prev.at_005;
        dips += cur.at_010 < prev.at_010;
        prev = cur;
      }
      last_mismatch += !(prev == final_pck);
    }
  }
  return {dips == 0 && last_mismatch == 0,
          fmt("%zu decreases across 50 traces x 2 components x 2 thresholds; layer-L mismatches %zu", dips,
              last_mismatch)};
}

// 8 -------------------------------------------------------------------------

Outcome middle_half() {
  std::size_t bad = 0;
  for (std::size_t n = 4; n <= 1000; ++n) {
    const IndexRange r = subset_middle_half(n);
    const std::size_t q = (n + 3) / 4;
    bad += r.size() != n - 2 * q;
    bad += r.begin != n - r.end;  // same number dropped at each end
    bad += r.begin != q;
  }
  bool small_throw = true;
  for (std::size_t n = 0; n < 4; ++n) {
    try {
      subset_middle_half(n);
      small_throw = false;
    } catch (const EmptySubsetError&) {
    }
  }
  return {bad == 0 && small_throw, fmt("%zu violations over N = 4..1000; N < 4 rejected: %s", bad,
                                       small_throw ? "yes" : "no")};
}

// 9 -------------------------------------------------------------------------

int quiet_run(std::vector<std::string> args) {
  args.insert(args.begin(), "bodykit");
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old);
  return code;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "bodykit_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto at = [&](const char* name) { return (dir / name).string(); };
  bool ok = true;
  std::string why;

  ok &= quiet_run({"gen-model", "--seed", "42", "--out", at("m1.bkm")}) == 0;
  ok &= quiet_run({"gen-model", "--seed", "42", "--out", at("m2.bkm")}) == 0;
  const std::string c1 = codec::sha256_hex(codec::read_file(at("m1.bkm")));
  const std::string c2 = codec::sha256_hex(codec::read_file(at("m2.bkm")));
  const std::string anchor = "c5bd4f7d6ef0cdf8b1a5f7ac150adeac4bf527375add397fd88197a26cea6a27";
  const bool stable = c1 == c2 && c1 == anchor;

  ok &= quiet_run({"synth", "--model", at("m1.bkm"), "--source-model", at("src.bkm"), "--out", at("data.jsonl"),
                   "--sequences", "2", "--frames", "4", "--cameras", "2", "--seed", "9"}) == 0;
  const int r1 = quiet_run({"convert", "--manifest", at("data.jsonl"), "--out", at("w1.jsonl"), "--workers", "1",
                            "--report", at("w1.report.jsonl")});
  const int r4 = quiet_run({"convert", "--manifest", at("data.jsonl"), "--out", at("w4.jsonl"), "--workers", "4",
                            "--report", at("w4.report.jsonl")});
  const bool same = r1 == r4 && codec::read_file(at("w1.jsonl")) == codec::read_file(at("w4.jsonl")) &&
                    codec::read_file(at("w1.jsonl.rejects.jsonl")) == codec::read_file(at("w4.jsonl.rejects.jsonl")) &&
                    codec::read_file(at("w1.report.jsonl")) == codec::read_file(at("w4.report.jsonl"));
  ok &= (r1 == 0 || r1 == 3);
  fs::remove_all(dir);
  return {ok && stable && same, fmt("gen-model --seed 42 checksum %s...%s across runs; convert --workers 4 vs 1 "
                                    "outputs %s (exit %d/%d)",
                                    c1.substr(0, 8).c_str(), stable ? " stable and anchored" : " UNSTABLE",
                                    same ? "byte-identical" : "DIFFER", r1, r4)};
}

}  // namespace

int main() {
  report(1, "gradient suite", 60, gradients);
  report(2, "FK/skinning invariants", 30, fk_invariants);
  report(3, "Procrustes optimality", 120, procrustes);
  report(4, "loss algebra", 0, loss_algebra);
  report(5, "source-to-target round trip", 600, round_trip);
  report(6, "cascade closed loop", 300, cascade_closed_loop);
  report(7, "factorization probe", 0, probe);
  report(8, "middle-half subset rule", 0, middle_half);
  report(9, "determinism", 0, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
