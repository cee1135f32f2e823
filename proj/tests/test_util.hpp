#pragma once

#include <jasr/core/rng.hpp>
#include <jasr/core/tensor.hpp>
#include <jasr/model/config.hpp>

#include <unistd.h>

#include <filesystem>
#include <string>

namespace jasr::test {

template <class T = float>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// A few-thousand-parameter network that still exercises every module.
inline ModelConfig tiny_config(int channels = 4) {
    ModelConfig c;
    c.channels = channels;
    c.extraction_blocks = 1;
    c.level_blocks = 1;
    return c;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("jasr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace jasr::test
