#include "cryptofc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "cryptofc/eval.hpp"

namespace cryptofc {
namespace {

namespace pt = boost::property_tree;

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    if constexpr (std::is_same_v<T, std::string>) {
      out.push_back(item);
    } else {
      std::istringstream conv(item);
      T value{};
      if (!(conv >> value) || !conv.eof()) throw std::invalid_argument("config: bad list item '" + item + "'");
      out.push_back(value);
    }
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

template <typename T>
T get_value(const std::string& text, const std::string& key) {
  std::istringstream conv(text);
  T value{};
  const bool negative_unsigned = std::is_unsigned_v<T> && text.find('-') != std::string::npos;
  if (text.empty() || negative_unsigned || !(conv >> value) || !conv.eof()) {
    throw std::invalid_argument("config: bad value for '" + key + "'");
  }
  return value;
}

// Drops a trailing "; ..." or "# ..." comment and surrounding blanks.
std::string strip_comment(const std::string& raw) {
  std::string text = raw;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((text[i] == ';' || text[i] == '#') && (i == 0 || text[i - 1] == ' ' || text[i - 1] == '\t')) {
      text.resize(i);
      break;
    }
  }
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return text.substr(first, text.find_last_not_of(" \t") - first + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must lie in (0, 1)");
  if (window == 0) fail("window must be positive");
  if (lstm.hidden_size == 0) fail("lstm hidden_size must be positive");
  if (lstm.batch_size == 0) fail("lstm batch_size must be positive");
  if (epochs.empty()) fail("lstm epochs list is empty");
  for (int e : epochs) {
    if (e < 1) fail("lstm epochs must be >= 1");
  }
  if (svr.kernels.empty() || svr.gammas.empty() || svr.cs.empty()) fail("svr grid lists must be non-empty");
  if (svr.folds < 2) fail("svr folds must be >= 2");
  if (degrees.empty()) fail("poly degrees list is empty");
  std::set<int> seen;
  for (int d : degrees) {
    if (d < 1) fail("poly degrees must be >= 1");
    if (!seen.insert(d).second) fail("poly degrees must be distinct");
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out << "data.target=" << dataset::to_string(target) << '\n'
      << "data.train_fraction=" << format_double(train_fraction) << '\n'
      << "data.window=" << window << '\n'
      << "lstm.hidden_size=" << lstm.hidden_size << '\n'
      << "lstm.batch_size=" << lstm.batch_size << '\n'
      << "lstm.learning_rate=" << format_double(lstm.adam.learning_rate) << '\n'
      << "lstm.beta1=" << format_double(lstm.adam.beta1) << '\n'
      << "lstm.beta2=" << format_double(lstm.adam.beta2) << '\n'
      << "lstm.eps=" << format_double(lstm.adam.eps) << '\n'
      << "lstm.forget_bias=" << format_double(lstm.forget_bias) << '\n'
      << "lstm.epochs=" << join(epochs) << '\n';
  std::vector<std::string> kernels;
  for (auto k : svr.kernels) kernels.emplace_back(svr::to_string(k));
  out << "svr.kernels=";
  for (std::size_t i = 0; i < kernels.size(); ++i) out << (i ? "," : "") << kernels[i];
  out << '\n'
      << "svr.gammas=" << join(svr.gammas) << '\n'
      << "svr.cs=" << join(svr.cs) << '\n'
      << "svr.folds=" << svr.folds << '\n'
      << "svr.epsilon=" << format_double(svr.epsilon) << '\n'
      << "svr.tol=" << format_double(svr.tol) << '\n'
      << "svr.coef0=" << format_double(svr.coef0) << '\n'
      << "svr.max_iter=" << svr.max_iter << '\n'
      << "svr.features=" << (svr_features == SvrFeatures::Time ? "time" : "window") << '\n'
      << "poly.degrees=" << join(degrees) << '\n'
      << "poly.feature=" << (poly_feature == PolyFeature::Time ? "time" : "lag") << '\n'
      << "run.seed=" << seed << '\n';
  return out.str();
}

std::string RunConfig::hash() const { return eval::to_hex(eval::fnv1a64(canonical())); }

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }

  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument("config: key '" + section + "' must sit inside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const auto text = strip_comment(node.get_value<std::string>());
      if (name == "data.input") cfg.input_path = text;
      else if (name == "data.target") cfg.target = dataset::parse_price_column(text);
      else if (name == "data.train_fraction") cfg.train_fraction = get_value<double>(text, name);
      else if (name == "data.window") cfg.window = get_value<std::size_t>(text, name);
      else if (name == "lstm.hidden_size") cfg.lstm.hidden_size = get_value<std::size_t>(text, name);
      else if (name == "lstm.batch_size") cfg.lstm.batch_size = get_value<std::size_t>(text, name);
      else if (name == "lstm.learning_rate") cfg.lstm.adam.learning_rate = get_value<double>(text, name);
      else if (name == "lstm.beta1") cfg.lstm.adam.beta1 = get_value<double>(text, name);
      else if (name == "lstm.beta2") cfg.lstm.adam.beta2 = get_value<double>(text, name);
      else if (name == "lstm.eps") cfg.lstm.adam.eps = get_value<double>(text, name);
      else if (name == "lstm.forget_bias") cfg.lstm.forget_bias = get_value<double>(text, name);
      else if (name == "lstm.epochs") cfg.epochs = parse_list<int>(text);
      else if (name == "svr.kernels") {
        cfg.svr.kernels.clear();
        for (const auto& k : parse_list<std::string>(text)) cfg.svr.kernels.push_back(svr::parse_kernel_kind(k));
      }
      else if (name == "svr.gammas") cfg.svr.gammas = parse_list<double>(text);
      else if (name == "svr.cs") cfg.svr.cs = parse_list<double>(text);
      else if (name == "svr.folds") cfg.svr.folds = get_value<std::size_t>(text, name);
      else if (name == "svr.epsilon") cfg.svr.epsilon = get_value<double>(text, name);
      else if (name == "svr.tol") cfg.svr.tol = get_value<double>(text, name);
      else if (name == "svr.coef0") cfg.svr.coef0 = get_value<double>(text, name);
      else if (name == "svr.max_iter") cfg.svr.max_iter = get_value<std::size_t>(text, name);
      else if (name == "svr.features") {
        if (text == "time") cfg.svr_features = SvrFeatures::Time;
        else if (text == "window") cfg.svr_features = SvrFeatures::Window;
        else throw std::invalid_argument("config: svr.features must be time or window");
      }
      else if (name == "poly.degrees") cfg.degrees = parse_list<int>(text);
      else if (name == "poly.feature") {
        if (text == "time") cfg.poly_feature = PolyFeature::Time;
        else if (text == "lag") cfg.poly_feature = PolyFeature::Lag;
        else throw std::invalid_argument("config: poly.feature must be time or lag");
      }
      else if (name == "run.seed") cfg.seed = get_value<std::uint64_t>(text, name);
      else if (name == "run.out_dir") cfg.out_dir = text;
      else throw std::invalid_argument("config: unknown key '" + name + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace cryptofc
