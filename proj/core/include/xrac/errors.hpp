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

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace xrac {

/// Root of every error thrown by the xrac libraries.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// EAP or RADIUS bytes that do not form a well-formed packet.
class MalformedPacket : public Error {
public:
    using Error::Error;
};

/// EAPoUDP header or body inconsistencies.
class MalformedFrame : public Error {
public:
    using Error::Error;
};

/// A value that cannot be put on the wire (length overflow, missing
/// mandatory attribute, ...).
class EncodeError : public Error {
public:
    using Error::Error;
};

/// Textual input (container identity, config files, addresses) that does
/// not parse.
class ParseError : public Error {
public:
    using Error::Error;
};

/// RADIUS Response Authenticator or Message-Authenticator did not verify.
/// Means a wrong shared secret or a modified packet.
class AuthenticatorMismatch : public Error {
public:
    using Error::Error;
};

class DanglingReference : public Error {
public:
    explicit DanglingReference(std::string name)
        : Error("dangling reference: " + name), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class UnknownImage : public Error {
public:
    explicit UnknownImage(const std::string& name) : Error("unknown image: " + name) {}
};

/// A service could not come up (bind failure, missing file, ...).
class StartupError : public Error {
public:
    using Error::Error;
};

}  // namespace xrac
