// Copyright 2026 The xrac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xrac/aa_store.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include "xrac/errors.hpp"

namespace xrac::store {

namespace {

struct Token {
    enum Kind { kWord, kString, kPunct, kEnd } kind = kEnd;
    std::string text;
    int line = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        skip_space();
        Token t;
        t.line = line_;
        if (pos_ >= text_.size()) return t;
        const char c = text_[pos_];
        if (c == '{' || c == '}' || c == '[' || c == ']' || c == '=' || c == ',') {
            ++pos_;
            t.kind = Token::kPunct;
            t.text = std::string(1, c);
            return t;
        }
        if (c == '"') return string_token(t);
        t.kind = Token::kWord;
        while (pos_ < text_.size() && !is_delim(text_[pos_])) t.text.push_back(text_[pos_++]);
        return t;
    }

private:
    static bool is_delim(char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '{' || c == '}' || c == '[' || c == ']' ||
               c == '=' || c == ',' || c == '"' || c == '#';
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    Token string_token(Token t) {
        t.kind = Token::kString;
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\n') throw ParseError("line " + std::to_string(t.line) + ": unterminated string");
            if (c == '\\' && pos_ < text_.size()) {
                const char e = text_[pos_++];
                c = e == 'n' ? '\n' : e == 't' ? '\t' : e;
            }
            t.text.push_back(c);
        }
        if (pos_ >= text_.size()) throw ParseError("line " + std::to_string(t.line) + ": unterminated string");
        ++pos_;
        return t;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view text) : lexer_(text) { advance(); }

    void run(std::vector<UserProfile>& users, std::vector<RacProfile>& racs, std::vector<GroupBinding>& groups) {
        while (cur_.kind != Token::kEnd) {
            if (cur_.kind != Token::kWord) fail("expected 'user', 'rac' or 'group'");
            const std::string kind = cur_.text;
            advance();
            const std::string name = expect_name();
            expect_punct("{");
            if (kind == "user") users.push_back(parse_user(name));
            else if (kind == "rac") racs.push_back(parse_rac(name));
            else if (kind == "group") groups.push_back(parse_group(name));
            else fail("unknown section '" + kind + "'");
        }
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("line " + std::to_string(cur_.line) + ": " + what);
    }

    void advance() { cur_ = lexer_.next(); }

    bool at_punct(const char* p) const { return cur_.kind == Token::kPunct && cur_.text == p; }

    void expect_punct(const char* p) {
        if (!at_punct(p)) fail(std::string("expected '") + p + "'");
        advance();
    }

    std::string expect_name() {
        if (cur_.kind != Token::kWord && cur_.kind != Token::kString) fail("expected a name");
        if (cur_.text.empty()) fail("empty name");
        std::string out = cur_.text;
        advance();
        return out;
    }

    std::string expect_string() {
        if (cur_.kind != Token::kString && cur_.kind != Token::kWord) fail("expected a value");
        std::string out = cur_.text;
        advance();
        return out;
    }

    std::vector<std::string> expect_list() {
        expect_punct("[");
        std::vector<std::string> out;
        while (!at_punct("]")) {
            if (cur_.kind == Token::kEnd) fail("unterminated list");
            out.push_back(expect_name());
            if (at_punct(",")) advance();
        }
        advance();
        return out;
    }

    // Iterates `key = value` entries until '}'.
    template <typename Fn>
    void entries(Fn&& on_entry) {
        while (!at_punct("}")) {
            if (cur_.kind != Token::kWord) fail("expected a key");
            const std::string key = cur_.text;
            advance();
            expect_punct("=");
            on_entry(key);
        }
        advance();
    }

    UserProfile parse_user(const std::string& name) {
        std::optional<std::string> password;
        entries([&](const std::string& key) {
            if (key != "password") fail("unknown user key '" + key + "'");
            if (password) fail("duplicate password for user '" + name + "'");
            password = expect_string();
        });
        if (!password) fail("user '" + name + "' has no password");
        return {name, to_bytes(*password)};
    }

    RacProfile parse_rac(const std::string& name) {
        RacProfile rac{name, {}, {}};
        bool have_digest = false;
        entries([&](const std::string& key) {
            if (key == "digest") {
                if (have_digest) fail("duplicate digest for rac '" + name + "'");
                const std::string value = expect_string();
                constexpr std::string_view prefix = "sha256:";
                if (value.rfind(prefix, 0) != 0 || value.size() != prefix.size() + 64) {
                    fail("digest of rac '" + name + "' must be sha256:<64 hex>");
                }
                try {
                    const auto raw = from_hex(std::string_view(value).substr(prefix.size()));
                    std::copy(raw.begin(), raw.end(), rac.image_digest.begin());
                } catch (const std::invalid_argument&) {
                    fail("digest of rac '" + name + "' is not hex");
                }
                have_digest = true;
            } else if (key == "allow") {
                const std::string value = expect_string();
                try {
                    rac.allowed_peers.push_back(net::Ipv6Prefix::parse(value));
                } catch (const ParseError& e) {
                    fail(e.what());
                }
            } else {
                fail("unknown rac key '" + key + "'");
            }
        });
        if (!have_digest) fail("rac '" + name + "' has no digest");
        return rac;
    }

    GroupBinding parse_group(const std::string& name) {
        GroupBinding g{name, {}, {}};
        bool have_users = false;
        bool have_images = false;
        entries([&](const std::string& key) {
            if (key == "users" && !have_users) {
                for (auto& u : expect_list()) g.members.insert(std::move(u));
                have_users = true;
            } else if (key == "images" && !have_images) {
                for (auto& i : expect_list()) g.permitted_images.insert(std::move(i));
                have_images = true;
            } else {
                fail("unexpected group key '" + key + "'");
            }
        });
        return g;
    }

    Lexer lexer_;
    Token cur_;
};

}  // namespace

AaStore AaStore::build(std::vector<UserProfile> users, std::vector<RacProfile> racs, std::vector<GroupBinding> groups) {
    AaStore store;
    for (auto& u : users) {
        if (u.user_name.empty()) throw ParseError("empty user name");
        const std::string key = u.user_name;
        if (!store.users_.emplace(key, std::move(u)).second) throw ParseError("duplicate user '" + key + "'");
    }
    for (auto& r : racs) {
        if (r.image_name.empty()) throw ParseError("empty rac image name");
        const std::string key = r.image_name;
        if (!store.racs_.emplace(key, std::move(r)).second) throw ParseError("duplicate rac '" + key + "'");
    }
    std::set<std::string, std::less<>> group_names;
    for (const auto& g : groups) {
        if (!group_names.insert(g.group_name).second) throw ParseError("duplicate group '" + g.group_name + "'");
        for (const auto& m : g.members) {
            if (!store.users_.contains(m)) throw DanglingReference(m);
        }
        for (const auto& i : g.permitted_images) {
            if (!store.racs_.contains(i)) throw DanglingReference(i);
        }
    }
    store.groups_ = std::move(groups);
    return store;
}

AaStore AaStore::parse(std::string_view text) {
    std::vector<UserProfile> users;
    std::vector<RacProfile> racs;
    std::vector<GroupBinding> groups;
    Parser(text).run(users, racs, groups);
    return build(std::move(users), std::move(racs), std::move(groups));
}

AaStore AaStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read AA store " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const DanglingReference&) {
        throw;
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

const UserProfile* AaStore::user(std::string_view name) const {
    auto it = users_.find(name);
    return it == users_.end() ? nullptr : &it->second;
}

const RacProfile* AaStore::rac(std::string_view image) const {
    auto it = racs_.find(image);
    return it == racs_.end() ? nullptr : &it->second;
}

bool AaStore::verify_user(std::string_view user_name, const std::function<bool(ByteView)>& proof) const {
    const auto* u = user(user_name);
    return u != nullptr && proof && proof(u->password);
}

bool AaStore::verify_image(std::string_view image_name, ByteView digest) const {
    const auto* r = rac(image_name);
    return r != nullptr && crypto::constant_time_equal(r->image_digest, digest);
}

bool AaStore::permitted(std::string_view user_name, std::string_view image_name) const {
    for (const auto& g : groups_) {
        if (g.members.contains(user_name) && g.permitted_images.contains(image_name)) return true;
    }
    return false;
}

radius::CazdAttributes AaStore::cazd_for(std::string_view image_name, const net::Ipv6Address& rac_address) const {
    const auto* r = rac(image_name);
    if (r == nullptr) throw UnknownImage(std::string(image_name));
    return {rac_address, r->allowed_peers, r->image_name};
}

}  // namespace xrac::store
