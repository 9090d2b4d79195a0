#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mmt/error.hpp"
#include "mmt/optim.hpp"

namespace mmt {
namespace {

TEST(Sgd, PlainStep) {
  Parameter w("w", Tensor::vector({5}));
  w.grad = Tensor::vector({2});
  std::vector<Parameter*> params = {&w};
  sgd_step(params, 1.0);
  EXPECT_EQ(w.value, Tensor::vector({3}));
}

TEST(Sgd, NormAtThresholdIsNotClipped) {
  Parameter w("w", Tensor::vector({0, 0}));
  w.grad = Tensor::vector({3, 4});
  std::vector<Parameter*> params = {&w};
  sgd_step(params, 1.0, 5.0);
  EXPECT_EQ(w.value, Tensor::vector({-3, -4}));
}

TEST(Sgd, ClipScalesThenSubtracts) {
  Parameter w("w", Tensor::vector({0, 0}));
  w.grad = Tensor::vector({6, 8});
  std::vector<Parameter*> params = {&w};
  sgd_step(params, 1.0, 5.0);
  EXPECT_DOUBLE_EQ(w.value[0], -3.0);
  EXPECT_DOUBLE_EQ(w.value[1], -4.0);
}

TEST(Sgd, ClippingUsesTheGlobalNorm) {
  Parameter a("a", Tensor::vector({0})), b("b", Tensor::vector({0}));
  a.grad = Tensor::vector({6});
  b.grad = Tensor::vector({8});
  std::vector<Parameter*> params = {&a, &b};
  EXPECT_DOUBLE_EQ(global_grad_norm(params), 10.0);
  sgd_step(params, 0.5, 5.0);
  EXPECT_DOUBLE_EQ(a.value[0], -1.5);
  EXPECT_DOUBLE_EQ(b.value[0], -2.0);
}

TEST(Sgd, NonFiniteGradientNamesTheParameter) {
  Parameter w("decoder.l0.bias", Tensor::vector({1, 1}));
  w.grad = Tensor::vector({0, std::numeric_limits<double>::infinity()});
  std::vector<Parameter*> params = {&w};
  try {
    sgd_step(params, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite);
    EXPECT_NE(std::string(e.what()).find("decoder.l0.bias"), std::string::npos);
  }
  EXPECT_EQ(w.value, Tensor::vector({1, 1}));
}

TEST(Sgd, RejectsNonPositiveLearningRate) {
  Parameter w("w", Tensor::vector({1}));
  std::vector<Parameter*> params = {&w};
  EXPECT_THROW(sgd_step(params, 0.0), Error);
}

TEST(Sgd, ZeroGrads) {
  Parameter w("w", Tensor::vector({1}));
  w.grad = Tensor::vector({7});
  std::vector<Parameter*> params = {&w};
  zero_grads(params);
  EXPECT_EQ(w.grad, Tensor::vector({0}));
}

}  // namespace
}  // namespace mmt
