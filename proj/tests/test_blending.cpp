#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "mvsfuse/blending.hpp"
#include "mvsfuse/error.hpp"

using namespace mvsfuse;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img = Image::create(w, h, c);
    for (double& v : img.data) v = u(rng);
    return img;
}

/// Random interior mask; border pixels stay false by construction.
BlendMask random_mask(std::mt19937_64& rng, int w, int h, double fill = 0.5) {
    std::bernoulli_distribution flip(fill);
    std::vector<char> inside(static_cast<std::size_t>(w) * h, 0);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            inside[static_cast<std::size_t>(y) * w + x] = flip(rng) ? 1 : 0;
        }
    }
    return BlendMask(w, h, std::move(inside));
}

double grayscale_at(const Image& img, int x, int y) {
    if (img.channels == 1) return img.at(x, y, 0);
    return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
}

/// O(n^2) DFT reimplementation of the spectral swap, as an oracle for the
/// FFT-backed version. Operates on the full complex spectrum.
Image naive_frequency_fuse(const Image& original, const Image& rendered, double cutoff) {
    const int w = original.width;
    const int h = original.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const std::complex<double> i2pi(0.0, -2.0 * M_PI);

    Image out = Image::create(w, h, original.channels);
    std::vector<std::complex<double>> spec_o(n), spec_r(n);
    for (int c = 0; c < original.channels; ++c) {
        for (int ky = 0; ky < h; ++ky) {
            for (int kx = 0; kx < w; ++kx) {
                std::complex<double> so = 0.0, sr = 0.0;
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const std::complex<double> e =
                            std::exp(i2pi * (double(ky) * y / h + double(kx) * x / w));
                        so += original.at(x, y, c) * e;
                        sr += rendered.at(x, y, c) * e;
                    }
                }
                const double fy = ky <= h / 2 ? ky : ky - h;
                const double fx = kx <= w / 2 ? kx : w - kx;  // mirrored half-spectrum bin
                const double ty = fy / (h / 2.0);
                const double tx = fx / (w / 2.0);
                const double radius = std::sqrt((ty * ty + tx * tx) / 2.0);
                spec_r[static_cast<std::size_t>(ky) * w + kx] = radius > cutoff ? so : sr;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::complex<double> v = 0.0;
                for (int ky = 0; ky < h; ++ky) {
                    for (int kx = 0; kx < w; ++kx) {
                        v += spec_r[static_cast<std::size_t>(ky) * w + kx] *
                             std::exp(-i2pi * (double(ky) * y / h + double(kx) * x / w));
                    }
                }
                out.at(x, y, c) = std::clamp(v.real() / double(n), 0.0, 1.0);
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("image shape validation") {
    CHECK_THROWS_AS(Image::create(0, 4, 1), InvalidArgument);
    CHECK_THROWS_AS(Image::create(4, 4, 2), InvalidArgument);
    Image img = Image::create(4, 4, 3, 0.5);
    CHECK(img.data.size() == 48);
    CHECK(img.at(3, 3, 2) == 0.5);
    img.data.pop_back();
    CHECK_THROWS_AS(img.validate(), InvalidArgument);
}

TEST_CASE("blend mask rejects border pixels and bad sizes") {
    std::vector<char> inside(16, 0);
    inside[5] = 1;  // (1,1): interior, fine
    CHECK_NOTHROW(BlendMask(4, 4, inside));

    inside[0] = 1;  // (0,0): border
    CHECK_THROWS_AS(BlendMask(4, 4, inside), InvalidArgument);

    CHECK_THROWS_AS(BlendMask(4, 4, std::vector<char>(15, 0)), InvalidArgument);
    CHECK_THROWS_AS(BlendMask(0, 4, std::vector<char>{}), InvalidArgument);
}

TEST_CASE("poisson_blend keeps unmasked pixels bit-identical to the target") {
    std::mt19937_64 rng(179);
    for (int trial = 0; trial < 5; ++trial) {
        const Image target = random_image(rng, 24, 18, 3);
        const Image source = random_image(rng, 24, 18, 3);
        const BlendMask mask = random_mask(rng, 24, 18);

        const Image out = poisson_blend(target, source, mask, BlendMode::kNormalClone);
        for (int y = 0; y < 18; ++y) {
            for (int x = 0; x < 24; ++x) {
                if (mask.at(x, y)) continue;
                for (int c = 0; c < 3; ++c) {
                    CHECK(out.at(x, y, c) == target.at(x, y, c));
                }
            }
        }
    }
}

TEST_CASE("poisson_blend solution satisfies the stencil equation") {
    std::mt19937_64 rng(181);
    const int w = 32, h = 32;
    const Image target = random_image(rng, w, h, 3);
    const Image source = random_image(rng, w, h, 3);
    const BlendMask mask = random_mask(rng, w, h, 0.6);

    Image raw;
    poisson_blend(target, source, mask, BlendMode::kNormalClone, &raw);

    for (int c = 0; c < 3; ++c) {
        for (int y = 1; y < h - 1; ++y) {
            for (int x = 1; x < w - 1; ++x) {
                if (!mask.at(x, y)) continue;
                // 4f(p) - sum f(q) must equal 4g(p) - sum g(q); unmasked
                // neighbors contribute their target value on the left side.
                double lhs = 4.0 * raw.at(x, y, c);
                double rhs = 4.0 * source.at(x, y, c);
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    lhs -= raw.at(x + dx[d], y + dy[d], c);
                    rhs -= source.at(x + dx[d], y + dy[d], c);
                }
                CHECK(std::abs(lhs - rhs) < 1e-6);
            }
        }
    }
}

TEST_CASE("poisson_blend matches a dense direct solve on a small instance") {
    std::mt19937_64 rng(191);
    const int w = 8, h = 8;
    const Image target = random_image(rng, w, h, 1);
    const Image source = random_image(rng, w, h, 1);
    const BlendMask mask = random_mask(rng, w, h, 0.7);

    Image raw;
    poisson_blend(target, source, mask, BlendMode::kNormalClone, &raw);

    std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            index[static_cast<std::size_t>(y) * w + x] = static_cast<int>(pixels.size());
            pixels.emplace_back(x, y);
        }
    }
    const int n = static_cast<int>(pixels.size());
    REQUIRE(n > 0);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int i = 0; i < n; ++i) {
        const auto [x, y] = pixels[i];
        A(i, i) = 4.0;
        b[i] = 4.0 * source.at(x, y, 0);
        for (int d = 0; d < 4; ++d) {
            const int qx = x + dx[d], qy = y + dy[d];
            b[i] -= source.at(qx, qy, 0);
            const int j = index[static_cast<std::size_t>(qy) * w + qx];
            if (j >= 0) {
                A(i, j) = -1.0;
            } else {
                b[i] += target.at(qx, qy, 0);
            }
        }
    }
    const Eigen::VectorXd x_dense = A.fullPivLu().solve(b);
    for (int i = 0; i < n; ++i) {
        const auto [x, y] = pixels[i];
        CHECK(std::abs(raw.at(x, y, 0) - x_dense[i]) < 1e-6);
    }
}

TEST_CASE("poisson_blend with source equal to target is the identity") {
    std::mt19937_64 rng(193);
    const Image target = random_image(rng, 16, 16, 3);
    const BlendMask mask = random_mask(rng, 16, 16);

    const Image out = poisson_blend(target, target, mask, BlendMode::kNormalClone);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        CHECK(out.data[i] == target.data[i]);
    }
}

TEST_CASE("poisson_blend with an empty mask returns the target") {
    std::mt19937_64 rng(197);
    const Image target = random_image(rng, 10, 10, 3);
    const Image source = random_image(rng, 10, 10, 3);
    const BlendMask mask(10, 10, std::vector<char>(100, 0));

    const Image out = poisson_blend(target, source, mask, BlendMode::kMonochromeTransfer);
    CHECK(out.data == target.data);
}

TEST_CASE("monochrome transfer equals normal clone for a gray source") {
    std::mt19937_64 rng(199);
    const Image target = random_image(rng, 14, 12, 3);
    Image source = Image::create(14, 12, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 14; ++x) {
            const double v = u(rng);
            for (int c = 0; c < 3; ++c) source.at(x, y, c) = v;
        }
    }
    const BlendMask mask = random_mask(rng, 14, 12);

    const Image mono = poisson_blend(target, source, mask, BlendMode::kMonochromeTransfer);
    const Image clone = poisson_blend(target, source, mask, BlendMode::kNormalClone);
    for (std::size_t i = 0; i < mono.data.size(); ++i) {
        CHECK(mono.data[i] == doctest::Approx(clone.data[i]).epsilon(1e-9));
    }
}

TEST_CASE("monochrome transfer pulls all channels toward the luminance gradients") {
    std::mt19937_64 rng(211);
    const Image target = random_image(rng, 16, 16, 3);
    const Image source = random_image(rng, 16, 16, 3);
    const BlendMask mask = random_mask(rng, 16, 16, 0.8);

    Image raw;
    poisson_blend(target, source, mask, BlendMode::kMonochromeTransfer, &raw);

    for (int y = 1; y < 15; ++y) {
        for (int x = 1; x < 15; ++x) {
            if (!mask.at(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                double lhs = 4.0 * raw.at(x, y, c);
                double rhs = 4.0 * grayscale_at(source, x, y);
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    lhs -= raw.at(x + dx[d], y + dy[d], c);
                    rhs -= grayscale_at(source, x + dx[d], y + dy[d]);
                }
                CHECK(std::abs(lhs - rhs) < 1e-6);
            }
        }
    }
}

TEST_CASE("poisson_blend shape mismatches") {
    const Image a = Image::create(8, 8, 3);
    const Image b = Image::create(8, 9, 3);
    const Image c = Image::create(8, 8, 1);
    const BlendMask mask(8, 8, std::vector<char>(64, 0));
    CHECK_THROWS_AS(poisson_blend(a, b, mask, BlendMode::kNormalClone), DimensionMismatch);
    CHECK_THROWS_AS(poisson_blend(a, c, mask, BlendMode::kNormalClone), DimensionMismatch);
    const BlendMask small(6, 6, std::vector<char>(36, 0));
    CHECK_THROWS_AS(poisson_blend(a, a, small, BlendMode::kNormalClone), DimensionMismatch);
}

TEST_CASE("frequency_fuse of an image with itself is the identity") {
    std::mt19937_64 rng(223);
    const Image img = random_image(rng, 32, 32, 3);
    for (double cutoff : {0.1, 0.5, 1.0}) {
        const Image out = frequency_fuse(img, img, cutoff);
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            CHECK(std::abs(out.data[i] - img.data[i]) < 1e-6);
        }
    }
}

TEST_CASE("cutoff 1 hands the whole spectrum to the rendered image") {
    std::mt19937_64 rng(227);
    const Image original = random_image(rng, 16, 16, 3);
    const Image rendered = random_image(rng, 16, 16, 3);
    const Image out = frequency_fuse(original, rendered, 1.0);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        CHECK(std::abs(out.data[i] - rendered.data[i]) < 1e-6);
    }
}

TEST_CASE("frequency_fuse matches a naive DFT implementation") {
    std::mt19937_64 rng(229);
    // Odd sizes exercise the half-spectrum mirroring.
    for (auto [w, h] : {std::pair{8, 8}, std::pair{7, 5}, std::pair{6, 9}}) {
        const Image original = random_image(rng, w, h, 3);
        const Image rendered = random_image(rng, w, h, 3);
        for (double cutoff : {0.3, 0.7}) {
            const Image got = frequency_fuse(original, rendered, cutoff);
            const Image want = naive_frequency_fuse(original, rendered, cutoff);
            for (std::size_t i = 0; i < got.data.size(); ++i) {
                CHECK(std::abs(got.data[i] - want.data[i]) < 1e-9);
            }
        }
    }
}

TEST_CASE("a low cutoff keeps the original's fine detail") {
    // Original carries a high-frequency checkerboard; rendered is flat. With a
    // small cutoff the checkerboard must survive nearly unchanged.
    const int w = 32, h = 32;
    Image original = Image::create(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            original.at(x, y, 0) = ((x + y) % 2 == 0) ? 0.75 : 0.25;
        }
    }
    const Image rendered = Image::create(w, h, 1, 0.5);

    const Image out = frequency_fuse(original, rendered, 0.2);
    double checker_amplitude = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sign = ((x + y) % 2 == 0) ? 1.0 : -1.0;
            checker_amplitude += sign * (out.at(x, y, 0) - 0.5);
        }
    }
    checker_amplitude /= double(w) * h;
    CHECK(checker_amplitude > 0.2);  // full strength would be 0.25
}

TEST_CASE("frequency_fuse validates cutoff and shapes") {
    const Image a = Image::create(8, 8, 1, 0.5);
    CHECK_THROWS_AS(frequency_fuse(a, a, 0.0), InvalidArgument);
    CHECK_THROWS_AS(frequency_fuse(a, a, -0.2), InvalidArgument);
    CHECK_THROWS_AS(frequency_fuse(a, a, 1.0 + 1e-12), InvalidArgument);
    CHECK_THROWS_AS(frequency_fuse(a, a, std::nan("")), InvalidArgument);
    const Image b = Image::create(8, 9, 1);
    CHECK_THROWS_AS(frequency_fuse(a, b, 0.5), DimensionMismatch);
}

TEST_CASE("to_grayscale uses the usual luminance weights") {
    Image img = Image::create(2, 1, 3);
    img.at(0, 0, 0) = 1.0;  // pure red
    img.at(1, 0, 0) = 0.25;
    img.at(1, 0, 1) = 0.5;
    img.at(1, 0, 2) = 0.75;

    const Image gray = to_grayscale(img);
    CHECK(gray.channels == 1);
    CHECK(gray.at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-15));
    CHECK(gray.at(1, 0, 0) ==
          doctest::Approx(0.299 * 0.25 + 0.587 * 0.5 + 0.114 * 0.75).epsilon(1e-15));

    CHECK_THROWS_AS(to_grayscale(gray), ChannelMismatch);
}
