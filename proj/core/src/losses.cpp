#include "gsalign/losses.hpp"
#include "gsalign/error.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace gsalign {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.data.size() != b.data.size())
        throw InvalidParameter(std::string(what) + ": image dimensions differ (" +
                               std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                               std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
    if (a.pixel_count() == 0) throw InvalidParameter(std::string(what) + ": empty image");
}

int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i >= n ? period - i : i;
}

std::vector<double> gaussian_window(const SsimOptions& opt) {
    if (opt.window < 1 || opt.window % 2 == 0)
        throw InvalidParameter("SSIM window must be a positive odd size");
    std::vector<double> w(opt.window);
    const int r = opt.window / 2;
    double sum = 0.0;
    for (int k = 0; k < opt.window; ++k) {
        w[k] = std::exp(-double((k - r) * (k - r)) / (2.0 * opt.sigma * opt.sigma));
        sum += w[k];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Single-channel plane with separable Gaussian filtering and its adjoint.
struct Plane {
    int width;
    int height;
    std::vector<double> v;
    Plane(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0.0) {}
    double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

Plane blur(const Plane& in, const std::vector<double>& w) {
    const int r = static_cast<int>(w.size()) / 2;
    Plane tmp(in.width, in.height), out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int k = 0; k < static_cast<int>(w.size()); ++k) s += w[k] * in(reflect(x + k - r, in.width), y);
            tmp(x, y) = s;
        }
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int k = 0; k < static_cast<int>(w.size()); ++k) s += w[k] * tmp(x, reflect(y + k - r, in.height));
            out(x, y) = s;
        }
    return out;
}

Plane blur_adjoint(const Plane& grad_out, const std::vector<double>& w) {
    const int r = static_cast<int>(w.size()) / 2;
    Plane tmp(grad_out.width, grad_out.height), in(grad_out.width, grad_out.height);
    for (int y = 0; y < grad_out.height; ++y)
        for (int x = 0; x < grad_out.width; ++x)
            for (int k = 0; k < static_cast<int>(w.size()); ++k)
                tmp(x, reflect(y + k - r, grad_out.height)) += w[k] * grad_out(x, y);
    for (int y = 0; y < grad_out.height; ++y)
        for (int x = 0; x < grad_out.width; ++x)
            for (int k = 0; k < static_cast<int>(w.size()); ++k)
                in(reflect(x + k - r, grad_out.width), y) += w[k] * tmp(x, y);
    return in;
}

Plane channel(const Image& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p(x, y) = img.at(x, y, c);
    return p;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.width, a.height);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
    return p;
}

// Mean SSIM over all channels; fills the gradient w.r.t. `a` when requested.
double mean_ssim(const Image& a, const Image& b, const SsimOptions& opt, Image* grad_a) {
    const std::vector<double> w = gaussian_window(opt);
    const double n = double(a.pixel_count()) * 3.0;
    double total = 0.0;
    if (grad_a) *grad_a = Image(a.width, a.height);
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        const Plane mx = blur(x, w), my = blur(y, w);
        const Plane exx = blur(product(x, x), w), eyy = blur(product(y, y), w);
        const Plane exy = blur(product(x, y), w);
        Plane d_mx(a.width, a.height), d_exx(a.width, a.height), d_exy(a.width, a.height);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const double ux = mx.v[i], uy = my.v[i];
            const double vx = exx.v[i] - ux * ux, vy = eyy.v[i] - uy * uy;
            const double cxy = exy.v[i] - ux * uy;
            const double a1 = 2.0 * ux * uy + opt.c1, a2 = 2.0 * cxy + opt.c2;
            const double b1 = ux * ux + uy * uy + opt.c1, b2 = vx + vy + opt.c2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad_a) {
                const double denom = b1 * b2;
                d_mx.v[i] = (2.0 * uy * (a2 - a1) / denom - s * 2.0 * ux * (b2 - b1) / denom) / n;
                d_exx.v[i] = (-s / b2) / n;
                d_exy.v[i] = (2.0 * a1 / denom) / n;
            }
        }
        if (grad_a) {
            const Plane g_mx = blur_adjoint(d_mx, w);
            const Plane g_exx = blur_adjoint(d_exx, w);
            const Plane g_exy = blur_adjoint(d_exy, w);
            for (int yy = 0; yy < a.height; ++yy)
                for (int xx = 0; xx < a.width; ++xx)
                    grad_a->at(xx, yy, c) =
                        g_mx(xx, yy) + 2.0 * x(xx, yy) * g_exx(xx, yy) + y(xx, yy) * g_exy(xx, yy);
        }
    }
    return total / n;
}

}  // namespace

ImageLoss l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    ImageLoss out;
    out.grad = Image(rendered.width, rendered.height);
    const double n = double(rendered.data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        out.grad.data[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
    }
    out.value = sum / n;
    return out;
}

ImageLoss ssim_loss(const Image& rendered, const Image& target, const SsimOptions& ssim) {
    require_same_shape(rendered, target, "ssim_loss");
    ImageLoss out;
    out.value = 1.0 - mean_ssim(rendered, target, ssim, &out.grad);
    for (double& g : out.grad.data) g = -g;
    return out;
}

ImageLoss rendered_loss(const Image& rendered, const Image& target, double lambda_ssim,
                        const SsimOptions& ssim) {
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0))
        throw InvalidParameter("lambda_ssim must be in [0, 1]");
    const ImageLoss l1 = l1_loss(rendered, target);
    const ImageLoss ss = ssim_loss(rendered, target, ssim);
    ImageLoss out;
    out.value = (1.0 - lambda_ssim) * l1.value + lambda_ssim * ss.value;
    out.grad = Image(rendered.width, rendered.height);
    for (std::size_t i = 0; i < out.grad.data.size(); ++i)
        out.grad.data[i] = (1.0 - lambda_ssim) * l1.grad.data[i] + lambda_ssim * ss.grad.data[i];
    return out;
}

OpacityRegularization opacity_reg(const std::vector<double>& opacities) {
    OpacityRegularization out;
    out.grad_logit.assign(opacities.size(), 0.0);
    if (opacities.empty()) return out;
    const double n = double(opacities.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < opacities.size(); ++i) {
        sum += std::abs(opacities[i]);
        out.grad_logit[i] = (opacities[i] > 0.0 ? 1.0 : (opacities[i] < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.value = sum / n;
    return out;
}

OpacityRegularization opacity_reg(const GaussianMap& map) {
    OpacityRegularization out;
    out.grad_logit.assign(map.size(), 0.0);
    if (map.empty()) return out;
    const double n = double(map.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double o = map[i].opacity();
        sum += o;
        out.grad_logit[i] = o * (1.0 - o) / n;
    }
    out.value = sum / n;
    return out;
}

double total_loss(double rendered, double opacity_reg, double lambda_o) {
    return rendered + lambda_o * opacity_reg;
}

LossBreakdown training_loss(const Image& rendered, const Image& target, const GaussianMap& map,
                            double lambda_ssim, double lambda_o, const SsimOptions& ssim) {
    const ImageLoss l1 = l1_loss(rendered, target);
    const ImageLoss ss = ssim_loss(rendered, target, ssim);
    const OpacityRegularization reg = opacity_reg(map);
    LossBreakdown out;
    out.l1 = l1.value;
    out.ssim_loss = ss.value;
    out.rendered = (1.0 - lambda_ssim) * l1.value + lambda_ssim * ss.value;
    out.opacity_reg = reg.value;
    out.total = total_loss(out.rendered, reg.value, lambda_o);
    out.grad_image = Image(rendered.width, rendered.height);
    for (std::size_t i = 0; i < out.grad_image.data.size(); ++i)
        out.grad_image.data[i] = (1.0 - lambda_ssim) * l1.grad.data[i] + lambda_ssim * ss.grad.data[i];
    out.grad_opacity_logit = reg.grad_logit;
    for (double& g : out.grad_opacity_logit) g *= lambda_o;
    return out;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return sum / double(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m < 1e-10) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

double ssim_metric(const Image& a, const Image& b, const SsimOptions& ssim) {
    require_same_shape(a, b, "ssim_metric");
    return mean_ssim(a, b, ssim, nullptr);
}

}  // namespace gsalign
