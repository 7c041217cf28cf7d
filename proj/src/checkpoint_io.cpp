#include "hierrec/checkpoint_io.hpp"

#include <sstream>

#include "hierrec/errors.hpp"

namespace hierrec {

void write_checkpoint(const std::filesystem::path& path, const std::string& schema,
                      const nlohmann::json& meta, const ad::ParamStore& params) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
    out << schema << '\n' << meta.dump() << '\n' << params.size() << '\n';
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ad::ParamId id{i};
        const ad::Matrix& v = params.value(id);
        out << params.name(id) << ' ' << v.rows() << ' ' << v.cols() << '\n';
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
        out << '\n';
    }
    if (!out) throw ConfigError("failed writing checkpoint: " + path.string());
}

CheckpointReader::CheckpointReader(const std::filesystem::path& path,
                                   const std::string& expected_schema)
    : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ConfigError("cannot open checkpoint: " + path.string());
    std::string schema, meta;
    std::getline(in_, schema);
    if (schema != expected_schema)
        throw CheckpointMismatch(path.string() + ": schema '" + schema + "', expected '" +
                                 expected_schema + "'");
    std::getline(in_, meta);
    try {
        meta_ = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMismatch(path.string() + ": bad metadata: " + e.what());
    }
}

void CheckpointReader::read_params(ad::ParamStore& params) {
    std::string line;
    std::getline(in_, line);
    if (std::stoul(line) != params.size())
        throw CheckpointMismatch(path_.string() + ": parameter count differs");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ad::ParamId id{i};
        std::getline(in_, line);
        std::istringstream header(line);
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        header >> name >> rows >> cols;
        ad::Matrix& v = params.value(id);
        if (name != params.name(id) || rows != v.rows() || cols != v.cols())
            throw CheckpointMismatch(path_.string() + ": parameter '" + name +
                                     "' does not match '" + params.name(id) + "'");
        in_.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
        in_.get();
        if (!in_) throw CheckpointMismatch(path_.string() + ": truncated parameter data");
    }
}

}  // namespace hierrec
