#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "imbeval/error.hpp"
#include "imbeval/ingest.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("imbeval_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename F>
bool throws_errc(imbeval::Errc code, F&& fn) {
    try {
        fn();
    } catch (const imbeval::Error& e) {
        return e.code() == code;
    } catch (...) {
        return false;
    }
    return false;
}

// Manifest with one group per sample unless group ids are given.
inline imbeval::SampleManifest make_manifest(const std::vector<int>& labels,
                                             int class_count = 0,
                                             const std::vector<std::string>& groups = {},
                                             const std::vector<imbeval::DatasetTag>& tags = {}) {
    imbeval::SampleManifest manifest;
    int max_label = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        imbeval::Sample s;
        s.sample_id = "s" + std::to_string(i);
        s.group_id = groups.empty() ? "g" + std::to_string(i) : groups[i];
        s.label = labels[i];
        if (!tags.empty()) s.dataset = tags[i];
        max_label = std::max(max_label, labels[i]);
        manifest.samples.push_back(std::move(s));
    }
    manifest.class_count = class_count > 0 ? class_count : max_label + 1;
    manifest.rebuild_index();
    return manifest;
}

}  // namespace testutil
