#include <chrono>
#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "rsplan/geometry.hpp"
#include "rsplan/nn.hpp"

using namespace rsplan;

namespace {

Batch random_batch(int n, int dim, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Batch b = Batch::zeros(n, dim);
  for (double& v : b.x) v = rng.uniform(lo, hi);
  return b;
}

double weighted_sum(const Batch& out, const Batch& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.x.size(); ++i) s += out.x[i] * w.x[i];
  return s;
}

}  // namespace

TEST_CASE("zero parameters give zero logits") {
  Rng rng(1);
  NeuralNet net = NeuralNet::mlp(3, {4, 4}, 2, rng);
  for (double* p : net.parameter_pointers()) *p = 0.0;
  const Vec out = net.infer_one({0.3, -1.0, 2.0});
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("identity running statistics make inference normalization a no-op") {
  Rng rng(2);
  NeuralNet net = NeuralNet::mlp(1, {1}, 1, rng);
  auto params = net.parameter_pointers();
  // layer 0: w, b, gamma, beta; layer 1: w, b
  *params[0] = 2.0;   // w0
  *params[1] = 1.0;   // b0
  *params[4] = 3.0;   // w1
  *params[5] = -1.0;  // b1
  // eps inside the square root shrinks the unit slightly
  const double denom = std::sqrt(1.0 + net.bn_eps());
  const double hidden = (2.0 * 5.0 + 1.0) / denom;
  const Vec out = net.infer_one({5.0});
  CHECK(out[0] == doctest::Approx(3.0 * hidden - 1.0).epsilon(1e-12));
}

TEST_CASE("train-mode batch normalization: per-unit mean 0 variance 1") {
  Rng rng(3);
  NeuralNet net = NeuralNet::mlp(2, {5, 3}, 2, rng);
  Batch in = random_batch(16, 2, rng);
  ForwardCache cache;
  net.train_forward(in, cache);
  // At initialization gamma=1, beta=0, so the pre-activation equals xhat.
  for (int li = 0; li < 2; ++li) {
    const Batch& pre = cache.pre_activation(li);
    for (int o = 0; o < pre.dim; ++o) {
      double mean = 0.0;
      for (int i = 0; i < pre.n; ++i) mean += pre.at(i, o);
      mean /= pre.n;
      double var = 0.0;
      for (int i = 0; i < pre.n; ++i) var += (pre.at(i, o) - mean) * (pre.at(i, o) - mean);
      var /= pre.n;
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-3);  // eps in the denominator shaves a little
    }
  }
}

TEST_CASE("train mode rejects bad batches") {
  Rng rng(4);
  NeuralNet net = NeuralNet::mlp(2, {3}, 1, rng);
  ForwardCache cache;
  CHECK_THROWS_AS(net.train_forward(random_batch(1, 2, rng), cache), ValidationError);
  CHECK_THROWS_AS(net.train_forward(random_batch(2, 3, rng), cache), ValidationError);
}

TEST_CASE("analytic gradients match central finite differences") {
  // The acceptance gate requires >= 100 random small networks. Trials whose
  // pre-activations sit close to a relu kink (or with a tiny batch variance
  // that would amplify an h-sized parameter step) are resampled, since central
  // differences are only valid at smooth points.
  const double h = 1e-4;
  int done = 0;
  std::uint64_t attempt = 0;
  while (done < 100) {
    Rng rng(1000 + attempt++);
    REQUIRE(attempt < 2000);
    const int in = 1 + static_cast<int>(rng.uniform_index(4));
    const int out = 1 + static_cast<int>(rng.uniform_index(3));
    const int n_hidden = 1 + static_cast<int>(rng.uniform_index(2));
    std::vector<int> hidden;
    for (int i = 0; i < n_hidden; ++i) hidden.push_back(2 + static_cast<int>(rng.uniform_index(7)));
    const int batch = 2 + static_cast<int>(rng.uniform_index(4));

    const NeuralNet base = NeuralNet::mlp(in, hidden, out, rng);
    const Batch input = random_batch(batch, in, rng);
    Batch weight = random_batch(batch, out, rng, -1.0, 1.0);

    // Kink / variance screen on an untouched copy.
    {
      NeuralNet probe = base;
      ForwardCache cache;
      probe.train_forward(input, cache);
      bool ok = true;
      for (int li = 0; li < n_hidden && ok; ++li) {
        for (double v : cache.pre_activation(li).x) {
          if (std::abs(v) < 0.02) ok = false;
        }
        for (double v : cache.batch_variance(li)) {
          if (v < 0.05) ok = false;
        }
      }
      if (!ok) continue;
    }

    NeuralNet analytic_net = base;
    ForwardCache cache;
    analytic_net.train_forward(input, cache);
    const Vec grad = analytic_net.backward(cache, weight).flatten();

    NeuralNet plus = base, minus = base;
    auto pp = plus.parameter_pointers();
    auto pm = minus.parameter_pointers();
    REQUIRE(grad.size() == pp.size());
    for (std::size_t k = 0; k < pp.size(); ++k) {
      const double orig_p = *pp[k], orig_m = *pm[k];
      *pp[k] = orig_p + h;
      *pm[k] = orig_m - h;
      ForwardCache cp, cm;
      NeuralNet fp = plus, fm = minus;  // train_forward mutates running stats
      const double lp = weighted_sum(fp.train_forward(input, cp), weight);
      const double lm = weighted_sum(fm.train_forward(input, cm), weight);
      const double fd = (lp - lm) / (2.0 * h);
      *pp[k] = orig_p;
      *pm[k] = orig_m;
      const double tol = 1e-3 * std::max(std::abs(fd), std::abs(grad[k])) + 1e-7;
      CHECK(std::abs(fd - grad[k]) <= tol);
    }
    ++done;
  }
  CHECK(done == 100);
}

TEST_CASE("zero output gradient backpropagates to zero") {
  Rng rng(6);
  NeuralNet net = NeuralNet::mlp(2, {4}, 2, rng);
  ForwardCache cache;
  net.train_forward(random_batch(5, 2, rng), cache);
  const Vec g = net.backward(cache, Batch::zeros(5, 2)).flatten();
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("duplicating the batch leaves mean-loss gradients unchanged") {
  Rng rng(7);
  NeuralNet base = NeuralNet::mlp(3, {4, 3}, 2, rng);
  const Batch input = random_batch(4, 3, rng);
  const Batch w = random_batch(4, 2, rng, -1.0, 1.0);

  NeuralNet a = base;
  ForwardCache ca;
  a.train_forward(input, ca);
  Batch dout_a = w;
  for (double& v : dout_a.x) v /= 4.0;  // mean loss over 4 samples
  const Vec ga = a.backward(ca, dout_a).flatten();

  Batch doubled = Batch::zeros(8, 3);
  Batch w2 = Batch::zeros(8, 2);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 3; ++j) doubled.at(i, j) = input.at(i % 4, j);
    for (int j = 0; j < 2; ++j) w2.at(i, j) = w.at(i % 4, j) / 8.0;
  }
  NeuralNet b = base;
  ForwardCache cb;
  b.train_forward(doubled, cb);
  const Vec gb = b.backward(cb, w2).flatten();

  REQUIRE(ga.size() == gb.size());
  for (std::size_t k = 0; k < ga.size(); ++k) {
    CHECK(ga[k] == doctest::Approx(gb[k]).epsilon(1e-9));
  }
}

TEST_CASE("adam") {
  Rng rng(8);

  SUBCASE("first step moves by about -lr*sign(g)") {
    NeuralNet net = NeuralNet::mlp(1, {}, 1, rng);
    auto params = net.parameter_pointers();
    const double w0 = *params[0], b0 = *params[1];
    Gradients g = net.zero_grads();
    g.layers[0].dw[0] = 3.7;
    g.layers[0].db[0] = -0.2;
    Adam opt(0.01);
    opt.step(net, g);
    CHECK(*params[0] == doctest::Approx(w0 - 0.01).epsilon(1e-6));
    CHECK(*params[1] == doctest::Approx(b0 + 0.01).epsilon(1e-6));
  }

  SUBCASE("zero gradient leaves parameters unchanged") {
    NeuralNet net = NeuralNet::mlp(2, {3}, 1, rng);
    Vec before;
    for (double* p : net.parameter_pointers()) before.push_back(*p);
    Adam opt(0.01);
    opt.step(net, net.zero_grads());
    auto params = net.parameter_pointers();
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(*params[i] == before[i]);
  }

  SUBCASE("two steps match a scalar reference trace") {
    NeuralNet net = NeuralNet::mlp(1, {}, 1, rng);
    auto params = net.parameter_pointers();
    *params[0] = 1.0;
    *params[1] = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g1 = 2.0, g2 = -0.5;

    // Independent scalar trace for the weight parameter.
    double m = 0.0, v = 0.0, p = 1.0;
    m = b1 * m + (1 - b1) * g1;
    v = b2 * v + (1 - b2) * g1 * g1;
    p -= lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);
    m = b1 * m + (1 - b1) * g2;
    v = b2 * v + (1 - b2) * g2 * g2;
    p -= lr * (m / (1 - std::pow(b1, 2))) / (std::sqrt(v / (1 - std::pow(b2, 2))) + eps);

    Adam opt(lr);
    Gradients g = net.zero_grads();
    g.layers[0].dw[0] = g1;
    opt.step(net, g);
    g.layers[0].dw[0] = g2;
    opt.step(net, g);
    CHECK(*params[0] == doctest::Approx(p).epsilon(1e-12));
    CHECK(opt.steps_taken() == 2);
  }
}

TEST_CASE("running statistics approach the population statistics") {
  Rng rng(9);
  NeuralNet net = NeuralNet::mlp(1, {2}, 1, rng);
  // Fix the first layer so its affine outputs are shifted/scaled copies of the
  // input with known population moments.
  auto params = net.parameter_pointers();
  *params[0] = 1.0;   // w row 0
  *params[1] = 2.0;   // w row 1
  *params[2] = 0.5;   // b0
  *params[3] = -1.0;  // b1
  // Inputs uniform(-3, 3): mean 0, var 3. Unit 0: mean 0.5, var 3. Unit 1: mean -1, var 12.
  for (int step = 0; step < 3000; ++step) {
    Batch in = random_batch(64, 1, rng, -3.0, 3.0);
    ForwardCache cache;
    net.train_forward(in, cache);
  }
  const auto j = nlohmann::json::parse(net.to_json_string());
  const auto& l0 = j["layers"][0];
  CHECK(l0["running_mean"][0].get<double>() == doctest::Approx(0.5).epsilon(0.05));
  CHECK(l0["running_mean"][1].get<double>() == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(l0["running_var"][0].get<double>() == doctest::Approx(3.0).epsilon(0.05));
  CHECK(l0["running_var"][1].get<double>() == doctest::Approx(12.0).epsilon(0.05));
}

TEST_CASE("checkpoint round trip preserves inference") {
  Rng rng(10);
  NeuralNet net = NeuralNet::mlp(2, {5, 3}, 2, rng);
  for (int i = 0; i < 5; ++i) {
    ForwardCache cache;
    net.train_forward(random_batch(8, 2, rng), cache);
  }
  NeuralNet back = NeuralNet::from_json_string(net.to_json_string());
  for (int i = 0; i < 20; ++i) {
    const Vec x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const Vec a = net.infer_one(x);
    const Vec b = back.infer_one(x);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
  }

  CHECK_THROWS_AS(NeuralNet::from_json_string("{}"), ValidationError);
  CHECK_THROWS_AS(NeuralNet::from_json_string("{\"format_version\":1,\"layers\":[]}"),
                  ValidationError);
}

TEST_CASE("single-sample inference is deterministic and fast") {
  Rng rng(11);
  NeuralNet net = NeuralNet::mlp(2, {32, 16}, 2, rng);
  const Vec x{0.3, -0.7};
  const Vec first = net.infer_one(x);
  const auto t0 = std::chrono::steady_clock::now();
  const int reps = 10000;
  double sink = 0.0;
  for (int i = 0; i < reps; ++i) {
    const Vec out = net.infer_one(x);
    sink += out[0];
    if (out[1] != first[1]) FAIL("nondeterministic inference");
  }
  const double us_per_call =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count() /
      reps;
  CHECK(sink == doctest::Approx(first[0] * reps));
  CHECK(us_per_call < 1000.0);  // well under 1 ms
}
