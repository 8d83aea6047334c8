#ifndef GVARSV_IO_FETCH_HPP
#define GVARSV_IO_FETCH_HPP

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "gvarsv/error.hpp"
#include "gvarsv/io/csv.hpp"
#include "gvarsv/io/serialize.hpp"

namespace gvarsv {

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string error;
};

using HttpTransport = std::function<HttpResponse(const std::string& url)>;

/// GET through cpp-httplib. https needs the library built with OpenSSL.
inline HttpResponse httplib_get(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return {0, {}, "malformed URL " + url};
  const auto path_begin = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_begin);
  const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  httplib::Client client(origin);
  if (!client.is_valid()) return {0, {}, "unsupported endpoint " + origin};
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  const auto res = client.Get(path);
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

struct FetchRequest {
  std::string series_id;
  std::string start;  // YYYY-MM-DD or YYYY-MM
  std::string end;
  /// Placeholders {id}, {start}, {end} are substituted.
  std::string endpoint_template;
  bool network_enabled = false;
  std::filesystem::path cache_dir;  // empty = $GVARSV_CACHE_DIR, else ./.gvarsv_cache
};

inline std::filesystem::path resolve_cache_dir(const FetchRequest& req) {
  if (!req.cache_dir.empty()) return req.cache_dir;
  if (const char* env = std::getenv("GVARSV_CACHE_DIR"); env && *env) return env;
  return ".gvarsv_cache";
}

inline std::string expand_endpoint(const FetchRequest& req) {
  std::string url = req.endpoint_template;
  auto sub = [&](const std::string& key, const std::string& value) {
    for (auto pos = url.find(key); pos != std::string::npos; pos = url.find(key, pos + value.size())) url.replace(pos, key.size(), value);
  };
  sub("{id}", req.series_id);
  sub("{start}", req.start);
  sub("{end}", req.end);
  return url;
}

/// Cache file name from (id, range); characters outside [A-Za-z0-9._-] become '_'.
inline std::string cache_key(const FetchRequest& req) {
  std::string key = req.series_id + "_" + req.start + "_" + req.end;
  for (auto& ch : key)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_')) ch = '_';
  return key + ".csv";
}

struct FetchResult {
  std::filesystem::path path;
  bool cache_hit = false;
};

/// Downloads one series as raw CSV into the cache directory. A cached copy
/// short-circuits the request.
inline FetchResult fetch_remote_series(const FetchRequest& req, const HttpTransport& transport = httplib_get) {
  if (req.series_id.empty()) throw UserError("fetch: empty series id");
  const auto dir = resolve_cache_dir(req);
  const auto path = dir / cache_key(req);
  if (std::filesystem::exists(path)) return {path, true};
  if (!req.network_enabled) throw UserError("fetch: network disabled and " + path.string() + " is not cached");
  if (req.endpoint_template.empty()) throw UserError("fetch: no endpoint template configured");
  const std::string url = expand_endpoint(req);
  const HttpResponse res = transport(url);
  if (res.status == 0) throw UserError("fetch: request to " + url + " failed: " + res.error);
  if (res.status == 404) throw NotFoundError("fetch: HTTP 404 for series '" + req.series_id + "'");
  if (res.status < 200 || res.status >= 300) throw UserError("fetch: HTTP " + std::to_string(res.status) + " for series '" + req.series_id + "'");
  std::filesystem::create_directories(dir);
  write_text_atomic(path, res.body);
  return {path, false};
}

/// Turns a two-column (date, value) series CSV into long-format panel rows for
/// one (country, variable). Daily or monthly dates collapse to YYYY-MM; a
/// repeated month keeps the last observation.
inline std::string pivot_series_csv(const std::string& raw, const std::string& country, const std::string& variable) {
  std::istringstream in(raw);
  const CsvTable t = parse_csv(in, "series " + country + "/" + variable);
  if (t.header.size() != 2) throw UserError("series " + country + "/" + variable + ": expected two columns (date, value)");
  std::vector<std::pair<int, std::string>> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int m = parse_month(t.rows[r][0], "series " + country + "/" + variable + ":" + std::to_string(t.line_numbers[r]));
    if (!rows.empty() && rows.back().first == m) rows.back().second = t.rows[r][1];
    else rows.emplace_back(m, t.rows[r][1]);
  }
  std::ostringstream os;
  for (const auto& [m, v] : rows) os << format_month(m) << ',' << country << ',' << variable << ',' << v << '\n';
  return os.str();
}

}  // namespace gvarsv

#endif  // GVARSV_IO_FETCH_HPP
