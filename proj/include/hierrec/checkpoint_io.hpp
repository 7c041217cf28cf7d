#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "hierrec/autodiff.hpp"

namespace hierrec {

/// File layout: schema line, one-line JSON metadata, then for every
/// parameter a `name rows cols` line followed by rows*cols little-endian
/// doubles in column-major order.
void write_checkpoint(const std::filesystem::path& path, const std::string& schema,
                      const nlohmann::json& meta, const ad::ParamStore& params);

class CheckpointReader {
public:
    /// Throws CheckpointMismatch when the schema line differs.
    CheckpointReader(const std::filesystem::path& path, const std::string& expected_schema);

    const nlohmann::json& meta() const noexcept { return meta_; }

    /// Fills `params`; names, order and shapes must match exactly.
    void read_params(ad::ParamStore& params);

private:
    std::filesystem::path path_;
    std::ifstream in_;
    nlohmann::json meta_;
};

}  // namespace hierrec
