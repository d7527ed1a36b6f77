#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/data/dataset.hpp"

namespace difftrain {

// CIFAR-10 binary batch layout: records of 3073 bytes, one label byte
// followed by 3072 pixel bytes (3 channel planes of 32x32, row-major).
inline constexpr std::size_t kCifarPixels = 3072;
inline constexpr std::size_t kCifarRecordBytes = kCifarPixels + 1;

// Reads CIFAR-10 binary batches, keeping only the two requested label bytes.
// class_a maps to label +1, class_b to -1. Pixels land in [0,1] when
// normalize is set, raw byte values otherwise.
inline Dataset load_cifar10_pair(const std::vector<std::string>& paths, std::uint8_t class_a,
                                 std::uint8_t class_b, bool normalize = true) {
    if (class_a == class_b) {
        throw std::invalid_argument("load_cifar10_pair: the two classes must differ");
    }
    std::vector<Vector> rows;
    std::vector<int> labels;

    for (const std::string& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw std::runtime_error("load_cifar10_pair: cannot open " + path);
        }
        in.seekg(0, std::ios::end);
        const auto bytes = static_cast<std::uint64_t>(in.tellg());
        in.seekg(0, std::ios::beg);
        if (bytes % kCifarRecordBytes != 0) {
            throw std::runtime_error("load_cifar10_pair: " + path + " has " + std::to_string(bytes) +
                                     " bytes; trailing partial record at offset " +
                                     std::to_string((bytes / kCifarRecordBytes) * kCifarRecordBytes));
        }
        std::vector<unsigned char> record(kCifarRecordBytes);
        const std::uint64_t n_records = bytes / kCifarRecordBytes;
        for (std::uint64_t r = 0; r < n_records; ++r) {
            if (!in.read(reinterpret_cast<char*>(record.data()), kCifarRecordBytes)) {
                throw std::runtime_error("load_cifar10_pair: short read in " + path + " at offset " +
                                         std::to_string(r * kCifarRecordBytes));
            }
            const std::uint8_t lab = record[0];
            if (lab != class_a && lab != class_b) continue;
            Vector px(kCifarPixels);
            const double scale = normalize ? 1.0 / 255.0 : 1.0;
            for (std::size_t i = 0; i < kCifarPixels; ++i) {
                px[i] = scale * static_cast<double>(record[i + 1]);
            }
            rows.push_back(std::move(px));
            labels.push_back(lab == class_a ? 1 : -1);
        }
    }

    Dataset ds = Dataset::create(Matrix::from_rows(rows), std::move(labels), "cifar10-pair");
    if (ds.positives.empty() || ds.negatives.empty()) {
        throw std::runtime_error("load_cifar10_pair: no records found for class " +
                                 std::to_string(ds.positives.empty() ? int(class_a) : int(class_b)));
    }
    return ds;
}

// Writes records in the same binary layout; used to synthesize fixture files.
inline void write_cifar10_file(const std::string& path,
                               const std::vector<std::pair<std::uint8_t, std::vector<std::uint8_t>>>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_cifar10_file: cannot open " + path);
    }
    for (const auto& [label, pixels] : records) {
        if (pixels.size() != kCifarPixels) {
            throw std::invalid_argument("write_cifar10_file: record must hold exactly " +
                                        std::to_string(kCifarPixels) + " pixel bytes");
        }
        out.put(static_cast<char>(label));
        out.write(reinterpret_cast<const char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size()));
    }
}

}  // namespace difftrain
