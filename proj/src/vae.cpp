#include "mmfusion/vae.hpp"

#include <cmath>

#include "mmfusion/loss.hpp"

namespace mmfusion {

Matrix concat_modalities(const ModalityFeatures& m, const ModalityDims& expected) {
  auto check = [](const char* name, std::size_t got, std::size_t want) {
    if (got != want) {
      throw ShapeError(std::string(name) + " modality has " + std::to_string(got) +
                       " features, expected " + std::to_string(want));
    }
  };
  check("textual", m.text.size(), expected.text);
  check("acoustic", m.audio.size(), expected.audio);
  check("visual", m.visual.size(), expected.visual);
  Matrix f(expected.total(), 1);
  std::size_t r = 0;
  for (const auto* part : {&m.text, &m.audio, &m.visual})
    for (double v : *part) f(r++, 0) = v;
  return f;
}

Matrix concat_batch(const std::vector<const ModalityFeatures*>& items,
                    const ModalityDims& expected) {
  Matrix batch(expected.total(), items.size());
  for (std::size_t j = 0; j < items.size(); ++j) {
    batch.set_col(j, concat_modalities(*items[j], expected).data());
  }
  return batch;
}

LatentSample reparameterize(const Matrix& mu, const Matrix& sigma, Rng& rng) {
  return reparameterize(mu, sigma, gaussian_sample(rng, mu.rows(), mu.cols()));
}

LatentSample reparameterize(const Matrix& mu, const Matrix& sigma, const Matrix& eps) {
  require_same_shape(mu, sigma, "reparameterize");
  require_same_shape(mu, eps, "reparameterize");
  LatentSample s{mu, sigma, eps, hadamard(eps, sigma)};
  s.z += mu;
  return s;
}

double gaussian_kl(const Matrix& mu, const Matrix& sigma) {
  require_same_shape(mu, sigma, "gaussian_kl");
  if (mu.cols() == 0) return 0.0;
  double total = 0.0;
  auto m = mu.data();
  auto s = sigma.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(s[i] > 0.0)) {
      throw DomainError("gaussian_kl: sigma must be positive, got " + std::to_string(s[i]));
    }
    total += 0.5 * (m[i] * m[i] + s[i] * s[i] - 1.0 - 2.0 * std::log(s[i]));
  }
  return total / static_cast<double>(mu.cols());
}

VaeModel::VaeModel(const VaeDims& dims)
    : enc_hidden("enc.h1", dims.input.total(), dims.hidden, Activation::kRelu),
      enc_mu("enc.mu", dims.hidden, dims.latent, Activation::kIdentity),
      enc_sigma("enc.sigma", dims.hidden, dims.latent, Activation::kSoftplus),
      dec_hidden("dec.h3", dims.latent, dims.hidden, Activation::kSoftplus),
      dec_out("dec.rec", dims.hidden, dims.input.total(), Activation::kIdentity),
      dims_(dims) {
  if (dims.input.total() == 0 || dims.hidden == 0 || dims.latent == 0) {
    throw ShapeError("VAE dimensions must be positive");
  }
}

void VaeModel::init(Rng& rng) {
  enc_hidden.init(rng);
  enc_mu.init(rng);
  enc_sigma.init(rng);
  dec_hidden.init(rng);
  dec_out.init(rng);
}

void VaeModel::check_input(const Matrix& features) const {
  if (features.rows() != input_dim()) {
    throw ShapeError("VAE input has " + std::to_string(features.rows()) + " rows, expected " +
                     std::to_string(input_dim()));
  }
}

Posterior VaeModel::encode(const Matrix& features) {
  check_input(features);
  const Matrix h1 = enc_hidden.forward(features);
  return {enc_mu.forward(h1), enc_sigma.forward(h1)};
}

Matrix VaeModel::decode(const Matrix& z) {
  if (z.rows() != latent_dim()) {
    throw ShapeError("VAE decode: z has " + std::to_string(z.rows()) + " rows, expected " +
                     std::to_string(latent_dim()));
  }
  return dec_out.forward(dec_hidden.forward(z));
}

Posterior VaeModel::encode_infer(const Matrix& features) const {
  check_input(features);
  const Matrix h1 = enc_hidden.infer(features);
  return {enc_mu.infer(h1), enc_sigma.infer(h1)};
}

Matrix VaeModel::decode_infer(const Matrix& z) const {
  if (z.rows() != latent_dim()) {
    throw ShapeError("VAE decode: z has " + std::to_string(z.rows()) + " rows, expected " +
                     std::to_string(latent_dim()));
  }
  return dec_out.infer(dec_hidden.infer(z));
}

ElboBreakdown VaeModel::elbo_loss(const Matrix& features, Rng& rng, double kl_weight,
                                  bool backward) {
  const Matrix eps = gaussian_sample(rng, latent_dim(), features.cols());
  return elbo_loss_with_noise(features, eps, kl_weight, backward);
}

ElboBreakdown VaeModel::elbo_loss_with_noise(const Matrix& features, const Matrix& eps,
                                             double kl_weight, bool backward,
                                             const Matrix* extra_mu_grad) {
  const Posterior post = encode(features);
  const LatentSample sample = reparameterize(post.mu, post.sigma, eps);
  const Matrix recon = decode(sample.z);

  const LossAndGrad rec = half_squared_error(recon, features);
  ElboBreakdown out;
  out.recon_term = rec.loss;
  out.kl_term = gaussian_kl(post.mu, post.sigma);
  out.kl_weight = kl_weight;
  out.total_loss = out.recon_term + kl_weight * out.kl_term;
  if (!backward) return out;

  const Matrix dz = dec_hidden.backward(dec_out.backward(rec.grad));
  const double scale = kl_weight / static_cast<double>(features.cols());
  Matrix dmu = dz;
  Matrix dsigma = hadamard(dz, sample.eps);
  auto mu = post.mu.data();
  auto sigma = post.sigma.data();
  auto gm = dmu.data();
  auto gs = dsigma.data();
  for (std::size_t i = 0; i < gm.size(); ++i) {
    gm[i] += scale * mu[i];
    gs[i] += scale * (sigma[i] - 1.0 / sigma[i]);
  }
  if (extra_mu_grad != nullptr) dmu += *extra_mu_grad;
  Matrix dh1 = enc_mu.backward(dmu);
  dh1 += enc_sigma.backward(dsigma);
  enc_hidden.backward(dh1);
  return out;
}

double VaeModel::ae_loss(const Matrix& features, bool backward, const Matrix* extra_mu_grad) {
  check_input(features);
  const Matrix h1 = enc_hidden.forward(features);
  const Matrix mu = enc_mu.forward(h1);
  const Matrix recon = decode(mu);
  const LossAndGrad rec = half_squared_error(recon, features);
  if (backward) {
    Matrix dmu = dec_hidden.backward(dec_out.backward(rec.grad));
    if (extra_mu_grad != nullptr) dmu += *extra_mu_grad;
    enc_hidden.backward(enc_mu.backward(dmu));
  }
  return rec.loss;
}

Matrix VaeModel::extract_latent(const Matrix& features, LatentMode mode, Rng* rng) const {
  if (mode == LatentMode::kSample && rng == nullptr) {
    throw std::invalid_argument("extract_latent: sample mode requires an rng");
  }
  Posterior post = encode_infer(features);
  if (mode == LatentMode::kMean) return std::move(post.mu);
  return reparameterize(post.mu, post.sigma, *rng).z;
}

void VaeModel::collect(ParamStore& store) {
  enc_hidden.collect(store);
  enc_mu.collect(store);
  enc_sigma.collect(store);
  dec_hidden.collect(store);
  dec_out.collect(store);
}

ParamStore VaeModel::params() {
  ParamStore store;
  collect(store);
  return store;
}

VaeModel vae_from_params(const std::vector<NamedMatrix>& saved, const ModalityDims& input) {
  const NamedMatrix* h1 = nullptr;
  const NamedMatrix* mu = nullptr;
  for (const auto& nm : saved) {
    if (nm.name == "enc.h1.W") h1 = &nm;
    if (nm.name == "enc.mu.W") mu = &nm;
  }
  if (h1 == nullptr || mu == nullptr) {
    throw FormatError("checkpoint is not a VAE (missing enc.h1.W / enc.mu.W)");
  }
  if (h1->value.cols() != input.total()) {
    throw ShapeError("VAE checkpoint expects input width " + std::to_string(h1->value.cols()) +
                     ", dataset has " + std::to_string(input.total()));
  }
  VaeModel model(VaeDims{input, h1->value.rows(), mu->value.rows()});
  ParamStore store = model.params();
  restore_params(saved, store);
  return model;
}

}  // namespace mmfusion
