#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "odflow/model.hpp"
#include "odflow/text.hpp"

namespace odflow {

// Versioned structured-text model files. Every floating-point value is
// written as a hex float, so a loaded model predicts bit-identically; an
// FNV-1a checksum over the payload guards against torn or edited files.

namespace serialize_detail {

constexpr const char* kMagic = "odflow-model 1";

inline void write_vector(std::ostream& out, const char* tag,
                         const Eigen::Ref<const Eigen::VectorXd>& v) {
  out << tag << " " << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << " " << format_hex_double(v(i));
  out << "\n";
}

inline void write_matrix(std::ostream& out, const char* tag,
                         const Eigen::Ref<const Eigen::MatrixXd>& m) {
  out << tag << " " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << "row";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << " " << format_hex_double(m(r, c));
    out << "\n";
  }
}

class LineReader {
 public:
  explicit LineReader(const std::string& payload) : stream_(payload) {}

  std::vector<std::string> next(const std::string& expected_tag) {
    std::string line;
    while (std::getline(stream_, line)) {
      std::string_view row = trim(line);
      if (row.empty()) continue;
      auto raw = split(row, ' ');
      std::vector<std::string> tokens;
      for (auto t : raw)
        if (!trim(t).empty()) tokens.emplace_back(trim(t));
      if (tokens.empty()) continue;
      if (!expected_tag.empty() && tokens[0] != expected_tag)
        throw std::runtime_error("model file: expected '" + expected_tag + "', found '" +
                                 tokens[0] + "'");
      return tokens;
    }
    throw std::runtime_error("model file: unexpected end while reading '" + expected_tag + "'");
  }

 private:
  std::istringstream stream_;
};

inline double token_double(const std::vector<std::string>& tokens, std::size_t i) {
  if (i >= tokens.size()) throw std::runtime_error("model file: missing numeric field");
  auto v = parse_hex_double(tokens[i]);
  if (!v) throw std::runtime_error("model file: bad numeric field '" + tokens[i] + "'");
  return *v;
}

inline long token_int(const std::vector<std::string>& tokens, std::size_t i) {
  if (i >= tokens.size()) throw std::runtime_error("model file: missing integer field");
  auto v = parse_int(tokens[i]);
  if (!v) throw std::runtime_error("model file: bad integer field '" + tokens[i] + "'");
  return static_cast<long>(*v);
}

inline Eigen::VectorXd read_vector(LineReader& reader, const std::string& tag) {
  auto tokens = reader.next(tag);
  long n = token_int(tokens, 1);
  if (n < 0 || static_cast<std::size_t>(n) + 2 != tokens.size())
    throw std::runtime_error("model file: bad vector length under '" + tag + "'");
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v(i) = token_double(tokens, static_cast<std::size_t>(i) + 2);
  return v;
}

inline Eigen::MatrixXd read_matrix(LineReader& reader, const std::string& tag) {
  auto header = reader.next(tag);
  long rows = token_int(header, 1);
  long cols = token_int(header, 2);
  if (rows < 0 || cols < 0) throw std::runtime_error("model file: bad matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    auto tokens = reader.next("row");
    if (tokens.size() != static_cast<std::size_t>(cols) + 1)
      throw std::runtime_error("model file: bad matrix row width");
    for (long c = 0; c < cols; ++c)
      m(r, c) = token_double(tokens, static_cast<std::size_t>(c) + 1);
  }
  return m;
}

}  // namespace serialize_detail

inline std::string serialize_model(const Model& model) {
  using namespace serialize_detail;
  std::ostringstream out;
  out << kMagic << "\n";
  out << "kind " << kind_name(kind_of(model)) << "\n";
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearModel>) {
          write_vector(out, "coef", m.coef);
          out << "intercept " << format_hex_double(m.intercept) << "\n";
        } else if constexpr (std::is_same_v<M, ForestModel>) {
          out << "param trees " << m.config.trees << "\n";
          out << "param max_features " << max_features_name(m.config.max_features) << "\n";
          out << "param seed " << m.config.seed << "\n";
          out << "param min_samples_split " << m.config.min_samples_split << "\n";
          out << "n_features " << m.n_features << "\n";
          out << "forest " << m.trees.size() << "\n";
          for (const DecisionTree& tree : m.trees) {
            out << "tree " << tree.nodes.size() << "\n";
            for (const auto& node : tree.nodes)
              out << "node " << node.feature << " " << format_hex_double(node.threshold) << " "
                  << node.left << " " << node.right << " " << format_hex_double(node.value)
                  << "\n";
          }
        } else if constexpr (std::is_same_v<M, SvrModel>) {
          out << "param cost " << format_hex_double(m.config.cost) << "\n";
          out << "param epsilon " << format_hex_double(m.config.epsilon) << "\n";
          out << "gamma " << format_hex_double(m.gamma) << "\n";
          out << "bias " << format_hex_double(m.bias) << "\n";
          write_vector(out, "coeffs", m.coeffs);
          write_matrix(out, "support", m.support);
        } else {
          out << "param width " << m.config.width << "\n";
          out << "param depth " << m.config.depth << "\n";
          out << "param seed " << m.config.seed << "\n";
          out << "layers " << m.weights.size() << "\n";
          for (std::size_t l = 0; l < m.weights.size(); ++l) {
            write_matrix(out, "weights", m.weights[l]);
            write_vector(out, "bias", m.biases[l]);
          }
        }
      },
      model);
  out << "end\n";
  std::string payload = out.str();
  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "checksum %016llx\n",
                static_cast<unsigned long long>(fnv1a64(payload)));
  return payload + checksum;
}

inline Model deserialize_model(const std::string& text) {
  using namespace serialize_detail;
  const std::size_t marker = text.rfind("checksum ");
  if (marker == std::string::npos)
    throw std::runtime_error("model file: missing checksum line");
  const std::string payload = text.substr(0, marker);
  const std::string checksum_line(trim(std::string_view(text).substr(marker)));
  char expected[32];
  std::snprintf(expected, sizeof(expected), "checksum %016llx",
                static_cast<unsigned long long>(fnv1a64(payload)));
  if (checksum_line != expected)
    throw std::runtime_error("model file: checksum mismatch (corrupt or edited file)");

  LineReader reader(payload);
  auto magic = reader.next("");
  if (magic.size() != 2 || magic[0] != "odflow-model" || magic[1] != "1")
    throw std::runtime_error("model file: unsupported format or version");
  auto kind_tokens = reader.next("kind");
  const ModelKind kind = parse_kind(kind_tokens.at(1));

  if (kind == ModelKind::linear) {
    LinearModel m;
    m.coef = read_vector(reader, "coef");
    m.intercept = token_double(reader.next("intercept"), 1);
    return m;
  }
  if (kind == ModelKind::forest) {
    ForestModel m;
    m.config.allow_nonstandard = true;  // stored values are authoritative
    m.config.trees = static_cast<int>(token_int(reader.next("param"), 2));
    m.config.max_features = parse_max_features(reader.next("param").at(2));
    m.config.seed = static_cast<std::uint64_t>(token_int(reader.next("param"), 2));
    m.config.min_samples_split = static_cast<int>(token_int(reader.next("param"), 2));
    m.n_features = static_cast<int>(token_int(reader.next("n_features"), 1));
    long tree_count = token_int(reader.next("forest"), 1);
    for (long t = 0; t < tree_count; ++t) {
      DecisionTree tree;
      long node_count = token_int(reader.next("tree"), 1);
      for (long i = 0; i < node_count; ++i) {
        auto tokens = reader.next("node");
        DecisionTree::Node node;
        node.feature = static_cast<int>(token_int(tokens, 1));
        node.threshold = token_double(tokens, 2);
        node.left = static_cast<int>(token_int(tokens, 3));
        node.right = static_cast<int>(token_int(tokens, 4));
        node.value = token_double(tokens, 5);
        tree.nodes.push_back(node);
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  }
  if (kind == ModelKind::svr) {
    SvrModel m;
    m.config.allow_nonstandard = true;
    m.config.cost = token_double(reader.next("param"), 2);
    m.config.epsilon = token_double(reader.next("param"), 2);
    m.gamma = token_double(reader.next("gamma"), 1);
    m.config.gamma = m.gamma;
    m.bias = token_double(reader.next("bias"), 1);
    m.coeffs = read_vector(reader, "coeffs");
    m.support = read_matrix(reader, "support");
    return m;
  }
  FnnModel m;
  m.config.allow_nonstandard = true;
  m.config.width = static_cast<int>(token_int(reader.next("param"), 2));
  m.config.depth = static_cast<int>(token_int(reader.next("param"), 2));
  m.config.seed = static_cast<std::uint64_t>(token_int(reader.next("param"), 2));
  long layers = token_int(reader.next("layers"), 1);
  for (long l = 0; l < layers; ++l) {
    m.weights.push_back(read_matrix(reader, "weights"));
    m.biases.push_back(read_vector(reader, "bias"));
  }
  return m;
}

inline void save_model_file(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << serialize_model(model);
}

inline Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace odflow
