#include "dropkit/mail.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "dropkit/error.hpp"

namespace dropkit {

namespace {

bool is_ascii(std::string_view s) {
  for (unsigned char c : s)
    if (c >= 0x80) return false;
  return true;
}

std::string base64(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

// RFC 2047 encoded-word for non-ASCII header text.
std::string header_text(std::string_view s) {
  if (is_ascii(s)) return std::string(s);
  return "=?UTF-8?B?" + base64(s) + "?=";
}

std::string one_line(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\r' || c == '\n') ? ' ' : c;
  return out;
}

}  // namespace

std::string render_rfc822(const MailMessage& m) {
  std::string out;
  out += "Message-ID: <" + m.id + "@dropkit>\r\n";
  out += "From: " + one_line(m.from) + "\r\n";
  out += "To: " + one_line(m.to) + "\r\n";
  out += "Subject: " + header_text(one_line(m.subject)) + "\r\n";
  out += "MIME-Version: 1.0\r\n";
  out += "Content-Type: text/plain; charset=UTF-8\r\n";
  out += "Content-Transfer-Encoding: 8bit\r\n\r\n";
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    const char c = m.body[i];
    if (c == '\r') continue;
    if (c == '\n') {
      out += "\r\n";
      // Dot-stuffing so a lone "." never ends the SMTP DATA phase.
      if (i + 1 < m.body.size() && m.body[i + 1] == '.') out += '.';
      continue;
    }
    if (i == 0 && c == '.') out += '.';
    out += c;
  }
  out += "\r\n";
  return out;
}

// ---------------------------------------------------------------------------

FileSink::FileSink(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw Error(ErrorClass::cant_create, "cannot create mail directory " + directory_.string() + ": " + ec.message());
}

std::string FileSink::send(const MailMessage& message) {
  if (message.id.empty()) throw ValidationError("mail message without an id");
  const auto path = directory_ / (message.id + ".eml");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TransportError("cannot write " + path.string());
  out << render_rfc822(message);
  if (!out) throw TransportError("write failed for " + path.string());
  return "file:" + path.filename().string();
}

// ---------------------------------------------------------------------------

std::optional<SmtpConfig> SmtpConfig::from_env() {
  const char* host = std::getenv("DROPKIT_SMTP_HOST");
  if (!host || !*host) return std::nullopt;
  SmtpConfig c;
  c.host = host;
  if (const char* v = std::getenv("DROPKIT_SMTP_PORT")) {
    try {
      c.port = std::stoi(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DROPKIT_SMTP_PORT is not a number: ") + v);
    }
  }
  if (const char* v = std::getenv("DROPKIT_SMTP_USER")) c.user = v;
  if (const char* v = std::getenv("DROPKIT_SMTP_PASSWORD")) c.password = v;
  if (const char* v = std::getenv("DROPKIT_SMTP_FROM")) c.from = v;
  if (const char* v = std::getenv("DROPKIT_SMTP_TLS")) c.tls = std::strcmp(v, "0") != 0;
  return c;
}

SmtpSink::SmtpSink(SmtpConfig config) : config_(std::move(config)) {
  if (config_.host.empty()) throw ConfigError("SMTP host is not set");
  if (config_.from.empty()) throw ConfigError("SMTP from-address is not set");
  static const bool initialized = curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK;
  if (!initialized) throw ConfigError("libcurl initialization failed");
}

namespace {

struct Payload {
  std::string data;
  std::size_t offset = 0;
};

std::size_t read_payload(char* buffer, std::size_t size, std::size_t count, void* user) {
  auto* p = static_cast<Payload*>(user);
  const std::size_t n = std::min(size * count, p->data.size() - p->offset);
  std::memcpy(buffer, p->data.data() + p->offset, n);
  p->offset += n;
  return n;
}

}  // namespace

std::string SmtpSink::send(const MailMessage& message) {
  if (message.to.empty()) throw ValidationError("no recipient address for " + message.id);
  MailMessage m = message;
  if (m.from.empty()) m.from = config_.from;

  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw TransportError("curl_easy_init failed");
  const bool implicit_tls = config_.tls && config_.port == 465;
  const std::string url =
      std::string(implicit_tls ? "smtps://" : "smtp://") + config_.host + ":" + std::to_string(config_.port);
  const std::string from = "<" + config_.from + ">";
  const std::string to = "<" + m.to + ">";
  std::unique_ptr<curl_slist, decltype(&curl_slist_free_all)> rcpt(curl_slist_append(nullptr, to.c_str()),
                                                                   curl_slist_free_all);
  Payload payload{render_rfc822(m)};

  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  if (config_.tls && !implicit_tls) curl_easy_setopt(curl.get(), CURLOPT_USE_SSL, long(CURLUSESSL_ALL));
  if (!config_.user.empty()) {
    curl_easy_setopt(curl.get(), CURLOPT_USERNAME, config_.user.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_PASSWORD, config_.password.c_str());
  }
  curl_easy_setopt(curl.get(), CURLOPT_MAIL_FROM, from.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_MAIL_RCPT, rcpt.get());
  curl_easy_setopt(curl.get(), CURLOPT_READFUNCTION, read_payload);
  curl_easy_setopt(curl.get(), CURLOPT_READDATA, &payload);
  curl_easy_setopt(curl.get(), CURLOPT_UPLOAD, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 20L);
  curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT, 60L);

  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) throw TransportError(std::string("SMTP delivery failed: ") + curl_easy_strerror(rc));
  return "smtp:<" + m.id + "@dropkit>";
}

// ---------------------------------------------------------------------------

ScriptedSink::ScriptedSink(std::vector<bool> script, bool then) : script_(std::move(script)), then_(then) {}

std::string ScriptedSink::send(const MailMessage& message) {
  std::lock_guard lock(mutex_);
  const std::size_t call = calls_++;
  const bool ok = call < script_.size() ? script_[call] : then_;
  if (!ok) throw TransportError("scripted delivery failure (call " + std::to_string(call + 1) + ")");
  delivered_.push_back(message);
  return "scripted:" + std::to_string(call + 1);
}

std::vector<MailMessage> ScriptedSink::delivered() const {
  std::lock_guard lock(mutex_);
  return delivered_;
}

std::size_t ScriptedSink::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

}  // namespace dropkit
