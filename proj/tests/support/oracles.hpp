#pragma once

// Reference computations written from the textbook definitions, without
// going through the library's factorisations.

#include <cstdint>
#include <random>

#include "calibasis/types.hpp"

namespace oracle {

using calibasis::Index;
using calibasis::Matrix;
using calibasis::Vector;

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng);
// A A^T / k + shift I with A random, so SPD with a controlled condition.
Matrix random_spd(Index n, std::mt19937_64& rng, double shift = 0.5);
Matrix random_orthogonal(Index n, std::mt19937_64& rng);

// v^T W^{-1} v through an explicit inverse.
double w_norm2(const Vector& v, const Matrix& w);
// min_c ||v - B c||_W^2 via normal equations with an explicit inverse.
Vector w_project(const Matrix& b, const Matrix& w, const Vector& v);
double recon_error(const Matrix& b, const Matrix& w, const Vector& v);

// Regularised lower incomplete gamma P(a, x) by series / continued fraction.
double gamma_p(double a, double x);
// Chi-squared quantile by bisection on gamma_p.
double chi2_quantile(double dof, double level);

// Simple-kriging-with-GLS predictor from the definitions, dense inverses.
struct GpOracle {
  double mean;
  double variance;
};
GpOracle gp_predict(const Matrix& x, const Vector& y, const Matrix& h, const Vector& phi,
                    double nugget, const Vector& x_new, const Vector& h_new);

// (z - m)^T S^{-1} (z - m) via LU.
double mahalanobis(const Vector& z, const Vector& m, const Matrix& s);

}  // namespace oracle

namespace oracle {

// A centred ensemble whose variance is dominated by a few directions, plus an
// observation anomaly pointing mostly along a low-variance direction: the
// leading SVD vectors miss it while the full basis contains it.
struct HiddenSignal {
  Matrix centred;  // l x n
  Matrix w;        // l x l SPD
  Vector z;        // anomaly
};
HiddenSignal hidden_signal(Index l, Index n, std::mt19937_64& rng, bool identity_weight = false);

}  // namespace oracle
