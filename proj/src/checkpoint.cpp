#include "mordred/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace mordred::checkpoint {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_f64(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_f64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

const std::string& field(const std::map<std::string, std::string>& header, const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw std::runtime_error("checkpoint: missing header key '" + key + "'");
    return it->second;
}

}  // namespace

void write(std::ostream& out, const seq2seq::Seq2SeqModel& model) {
    out << "mordred-checkpoint\n";
    out << "schema_version=" << kSchemaVersion << "\n";
    out << "mode=" << seq2seq::to_string(model.mode) << "\n";
    out << "n_units=" << model.units << "\n";
    out << "bins=" << (model.partition ? model.partition->bins() : 0) << "\n";
    out << "lookback=" << model.lookback << "\n";
    if (model.partition) {
        out << "partition_lower=" << format_double(model.partition->lower()) << "\n";
        out << "partition_upper=" << format_double(model.partition->upper()) << "\n";
    }
    out << "seed=" << model.seed << "\n";
    out << "p_drop=" << format_double(model.p_drop) << "\n";
    out << "handoff_dropout=" << (model.handoff_dropout ? 1 : 0) << "\n";
    out << "end_header\n";
    seq2seq::Seq2SeqModel::visit_tensors(model, [&](const char* name, const auto& t) {
        out << "tensor " << name << " " << t.rows() << " " << t.cols() << "\n";
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) put_f64(out, t(r, c));
        out << "\n";
    });
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

seq2seq::Seq2SeqModel read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "mordred-checkpoint")
        throw std::runtime_error("checkpoint: bad magic line");
    std::map<std::string, std::string> header;
    while (std::getline(in, line) && line != "end_header") {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed header line '" + line + "'");
        header[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (line != "end_header") throw std::runtime_error("checkpoint: header not terminated");
    if (std::stoi(field(header, "schema_version")) != kSchemaVersion)
        throw std::runtime_error("checkpoint: unsupported schema version " + field(header, "schema_version"));

    const auto mode = seq2seq::mode_from_string(field(header, "mode"));
    const auto units = static_cast<std::size_t>(std::stoull(field(header, "n_units")));
    const auto bins = static_cast<std::size_t>(std::stoull(field(header, "bins")));
    const auto lookback = static_cast<std::size_t>(std::stoull(field(header, "lookback")));
    std::optional<ordinal::BinPartition> partition;
    if (mode == seq2seq::Mode::ordinal)
        partition.emplace(std::stod(field(header, "partition_lower")), std::stod(field(header, "partition_upper")),
                          bins);
    auto model = seq2seq::Seq2SeqModel::create(mode, units, lookback, partition, std::stod(field(header, "p_drop")),
                                               field(header, "handoff_dropout") == "1",
                                               std::stoull(field(header, "seed")));

    seq2seq::Seq2SeqModel::visit_tensors(model, [&](const char* name, auto& t) {
        std::string tag, got_name;
        Eigen::Index rows = 0, cols = 0;
        if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing tensor " + std::string(name));
        std::istringstream ls(line);
        ls >> tag >> got_name >> rows >> cols;
        if (tag != "tensor" || got_name != name || rows != t.rows() || cols != t.cols())
            throw std::runtime_error("checkpoint: unexpected tensor record '" + line + "', wanted " + name);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = get_f64(in);
        if (in.get() != '\n') throw std::runtime_error("checkpoint: tensor " + got_name + " not terminated");
    });
    return model;
}

void save(const std::filesystem::path& path, const seq2seq::Seq2SeqModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write(out, model);
}

seq2seq::Seq2SeqModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read(in);
}

}  // namespace mordred::checkpoint
