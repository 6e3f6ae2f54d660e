#include <doctest.h>

#include <cmath>

#include "bodykit/cascade.hpp"
#include "bodykit/errors.hpp"
#include "bodykit/metrics.hpp"
#include "bodykit/synthetic.hpp"
#include "bodykit/toy_model.hpp"
#include "support.hpp"

using namespace bodykit;

namespace {

const BodyModel& toy() {
  static const BodyModel model = gen_toy_model(42);
  return model;
}

Intrinsics camera() { return default_intrinsics(640, 480); }

}  // namespace

TEST_SUITE("evidence objective") {
  TEST_CASE("vanishes at the rendering parameters") {
    UniformSource rng(71);
    for (int i = 0; i < 20; ++i) {
      const ParamSet truth = random_params(toy(), rng);
      const Evidence ev = render_evidence(toy(), truth, camera(), true);
      CHECK(evidence_objective(toy(), ev, truth) == 0.0);
      const auto b = evidence_breakdown(toy(), ev, truth);
      CHECK(b.total == 0.0);
      CHECK((b.used_j2d && b.used_j3d && b.used_theta && b.used_beta));
    }
  }

  TEST_CASE("infinite for non-positive scale or points behind the camera") {
    UniformSource rng(72);
    ParamSet p = random_params(toy(), rng);
    const Evidence ev = render_evidence(toy(), p, camera(), false);
    p.pi.s = 0.0;
    CHECK(std::isinf(evidence_objective(toy(), ev, p)));
    p.pi.s = 1e6;  // depth far below the body's extent
    CHECK(std::isinf(evidence_objective(toy(), ev, p)));
  }

  TEST_CASE("2D residuals are normalized by the larger image side") {
    UniformSource rng(73);
    const ParamSet truth = random_params(toy(), rng);
    Evidence ev = render_evidence(toy(), truth, camera(), false);
    for (auto& p : ev.j2d_hat.positions) p.x += 6.4;
    CascadeSettings s;
    s.limit_penalty_weight = 0.0;
    // mean over (K x 2) of |6.4 / 640| on x and 0 on y
    CHECK(evidence_objective(toy(), ev, truth, s) == doctest::Approx(s.weights.kp * 0.005).epsilon(1e-10));
  }

  TEST_CASE("forward-mode gradient matches finite differences") {
    UniformSource rng(74);
    const ParamLayout layout(toy());
    for (int i = 0; i < 5; ++i) {
      const ParamSet truth = random_params(toy(), rng);
      const Evidence ev = render_evidence(toy(), truth, camera(), true);
      const ParamSet at = random_params(toy(), rng);
      const CascadeSettings settings;
      auto f = make_objective([&](auto x) {
        using T = typename decltype(x)::value_type;
        return evidence_objective_t<T>(toy(), ev, layout, x, settings);
      });
      const auto x = layout.flatten(at);
      const auto ad = gradient(f, x);
      const auto fd = gradient(f, x, GradientMode::CentralFD);
      for (std::size_t k = 0; k < x.size(); ++k) CHECK(support::gradient_rel_error(ad.gradient[k], fd.gradient[k]) < 1e-4);
    }
  }
}

TEST_SUITE("coarse_init") {
  TEST_CASE("a twice-as-large box doubles the scale") {
    UniformSource rng(75);
    for (int i = 0; i < 20; ++i) {
      const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), false);
      Evidence big = ev;
      for (auto& p : big.j2d_hat.positions) p = {2 * (p.x - 320) + 320, 2 * (p.y - 240) + 240};
      const ParamSet a = coarse_init(ev, toy());
      const ParamSet b = coarse_init(big, toy());
      CHECK(b.pi.s == doctest::Approx(2 * a.pi.s).epsilon(1e-12));
      CHECK(a.theta.values == std::vector<double>(toy().pose_dim(), 0.0));
    }
  }

  TEST_CASE("the projected root lands on the box center") {
    UniformSource rng(76);
    const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), false);
    const ParamSet init = coarse_init(ev, toy());
    const auto uv = reproject(toy(), init, ev.intrinsics, ev.crop_size);
    const auto& root = uv.positions[toy().data().keypoint_root];
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const auto& p : ev.j2d_hat.positions)
      lo_u = std::min(lo_u, p.x), hi_u = std::max(hi_u, p.x), lo_v = std::min(lo_v, p.y), hi_v = std::max(hi_v, p.y);
    CHECK(root.x == doctest::Approx(0.5 * (lo_u + hi_u)).epsilon(1e-10));
    CHECK(root.y == doctest::Approx(0.5 * (lo_v + hi_v)).epsilon(1e-10));
  }

  TEST_CASE("needs two visible keypoints") {
    UniformSource rng(77);
    Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), false);
    for (auto& v : ev.j2d_hat.visibility) v = 0.0;
    ev.j2d_hat.visibility[3] = 1.0;
    CHECK_THROWS_AS(coarse_init(ev, toy()), InsufficientEvidenceError);
  }
}

TEST_SUITE("cascade") {
  TEST_CASE("a stage never raises the objective") {
    UniformSource rng(78);
    for (int i = 0; i < 5; ++i) {
      const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), i % 2 == 0);
      const ParamSet init = coarse_init(ev, toy());
      const ParamSet next = refine_stage(init, ev, toy(), 20);
      CHECK(evidence_objective(toy(), ev, next) <= evidence_objective(toy(), ev, init));
    }
    const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), false);
    CHECK_THROWS_AS(refine_stage(coarse_init(ev, toy()), ev, toy(), 0), DomainError);
  }

  TEST_CASE("trace bookkeeping and the loss identities") {
    UniformSource rng(79);
    const ParamSet truth = random_params(toy(), rng);
    const Evidence ev = render_evidence(toy(), truth, camera(), true);
    CascadeSettings s;
    s.stages = 4;
    s.steps_per_stage = 20;
    const CascadeTrace t = run_cascade(ev, toy(), s);
    REQUIRE(t.stages.size() == 5);
    CHECK(t.num_layers() == 4);
    for (std::size_t i = 1; i < t.stages.size(); ++i) CHECK(t.stages[i].objective <= t.stages[i - 1].objective);
    std::vector<PoseVector> thetas;
    for (std::size_t i = 1; i < t.stages.size(); ++i) thetas.push_back(t.stages[i].params.theta);
    REQUIRE(t.loss_refine.has_value());
    CHECK(*t.loss_refine == loss_refine(thetas, *ev.theta_hat));
    CHECK(*t.loss_total == loss_total(t.stages.front().breakdown.total, t.stages.back().breakdown.total, *t.loss_refine, s.weights));

    const Evidence plain = render_evidence(toy(), truth, camera(), false);
    CHECK_FALSE(run_cascade(plain, toy(), s).loss_refine.has_value());
  }

  TEST_CASE("closed loop on oracle evidence") {
    UniformSource rng(80);
    const ParamSet truth = random_params(toy(), rng);
    const Evidence ev = render_evidence(toy(), truth, camera(), true);
    const CascadeTrace t = run_cascade(ev, toy());
    CHECK(evidence_pck(toy(), ev, t.stages.back().params).at_005 == 1.0);
  }
}

TEST_SUITE("factorization_probe") {
  TEST_CASE("the last layer is the unprobed result") {
    UniformSource rng(81);
    const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), true);
    CascadeSettings s;
    s.stages = 3;
    s.steps_per_stage = 20;
    const CascadeTrace t = run_cascade(ev, toy(), s);
    const PckPair final_pck = evidence_pck(toy(), ev, t.stages.back().params);
    for (auto c : {ProbeComponent::Scale, ProbeComponent::PlaneTranslation})
      CHECK(factorization_probe(t, ev, toy(), c, 3) == final_pck);
    CHECK_THROWS_AS(factorization_probe(t, ev, toy(), ProbeComponent::Scale, 4), DomainError);
  }

  TEST_CASE("probing only swaps the chosen component") {
    UniformSource rng(82);
    const Evidence ev = render_evidence(toy(), random_params(toy(), rng), camera(), true);
    CascadeSettings s;
    s.stages = 2;
    s.steps_per_stage = 10;
    const CascadeTrace t = run_cascade(ev, toy(), s);
    ParamSet hybrid = t.stages.back().params;
    hybrid.pi.s = t.stages.front().params.pi.s;
    CHECK(factorization_probe(t, ev, toy(), ProbeComponent::Scale, 0) == evidence_pck(toy(), ev, hybrid));
    hybrid = t.stages.back().params;
    hybrid.pi.tx = t.stages.front().params.pi.tx;
    hybrid.pi.ty = t.stages.front().params.pi.ty;
    CHECK(factorization_probe(t, ev, toy(), ProbeComponent::PlaneTranslation, 0) == evidence_pck(toy(), ev, hybrid));
  }
}
