#pragma once

#include "mmfusion/checkpoint.hpp"
#include "mmfusion/dense.hpp"
#include "mmfusion/modality.hpp"
#include "mmfusion/rng.hpp"

namespace mmfusion {

struct VaeDims {
  ModalityDims input;
  std::size_t hidden = 0;
  std::size_t latent = 0;
};

/// Approximate posterior parameters for a batch (D_z x N each).
struct Posterior {
  Matrix mu;
  Matrix sigma;
};

/// z = mu + eps (.) sigma, with the noise kept for the backward pass.
struct LatentSample {
  Matrix mu;
  Matrix sigma;
  Matrix eps;
  Matrix z;
};

/// Negative ELBO split into its two terms, both averaged over the batch.
struct ElboBreakdown {
  double recon_term = 0.0;
  double kl_term = 0.0;
  double kl_weight = 1.0;
  double total_loss = 0.0;  ///< recon_term + kl_weight * kl_term
};

enum class LatentMode { kMean, kSample };

LatentSample reparameterize(const Matrix& mu, const Matrix& sigma, Rng& rng);
LatentSample reparameterize(const Matrix& mu, const Matrix& sigma, const Matrix& eps);

/// KL(N(mu, diag sigma^2) || N(0, I)) per column, averaged over columns:
/// sum_j 0.5 * (mu_j^2 + sigma_j^2 - 1 - ln sigma_j^2).
/// Throws DomainError on sigma <= 0.
double gaussian_kl(const Matrix& mu, const Matrix& sigma);

/// Variational encoder/decoder over concatenated modality features.
///
///   h1    = relu(W_h1 F + b_h1)
///   mu    = W_mu h1 + b_mu
///   sigma = softplus(W_sigma h1 + b_sigma)
///   h3    = softplus(W_h3 z + b_h3)
///   F_hat = W_rec h3 + b_rec
///
/// The plain autoencoder baseline shares the same parameters and feeds
/// z = mu straight to the decoder, leaving the sigma head unused.
class VaeModel {
 public:
  VaeModel() = default;
  explicit VaeModel(const VaeDims& dims);

  void init(Rng& rng);

  const VaeDims& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.input.total(); }
  std::size_t latent_dim() const { return dims_.latent; }

  /// Training-path encode; caches activations for backward.
  Posterior encode(const Matrix& features);
  Matrix decode(const Matrix& z);

  /// Cache-free variants, safe for concurrent inference on a frozen model.
  Posterior encode_infer(const Matrix& features) const;
  Matrix decode_infer(const Matrix& z) const;

  /// One-sample negative ELBO. With `backward`, gradients are accumulated
  /// into the parameters. `extra_mu_grad`, if given, is added to dL/dmu
  /// (used when a classifier is trained jointly on mu).
  ElboBreakdown elbo_loss(const Matrix& features, Rng& rng, double kl_weight = 1.0,
                          bool backward = true);
  ElboBreakdown elbo_loss_with_noise(const Matrix& features, const Matrix& eps,
                                     double kl_weight = 1.0, bool backward = true,
                                     const Matrix* extra_mu_grad = nullptr);

  /// Deterministic autoencoder loss 0.5 * mean ||F - decode(mu)||^2.
  double ae_loss(const Matrix& features, bool backward = true,
                 const Matrix* extra_mu_grad = nullptr);

  /// mu for kMean; a reparameterized draw for kSample (rng required).
  Matrix extract_latent(const Matrix& features, LatentMode mode, Rng* rng = nullptr) const;

  void collect(ParamStore& store);
  ParamStore params();

  DenseLayer enc_hidden;
  DenseLayer enc_mu;
  DenseLayer enc_sigma;
  DenseLayer dec_hidden;
  DenseLayer dec_out;

 private:
  void check_input(const Matrix& features) const;

  VaeDims dims_;
};

/// Rebuilds a model whose shapes are implied by a checkpoint's parameters.
VaeModel vae_from_params(const std::vector<NamedMatrix>& saved, const ModalityDims& input);

}  // namespace mmfusion
