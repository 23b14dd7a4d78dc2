//! Store-backed shop with login, declared exceptions and row-dependent paths.
//!
//! Ordering needs an existing product, so `placeOrder` only gets past its
//! lookup when an earlier action (or environment setup) added one.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::CmpOp::{Eq, Ge, Gt};
use super::{int_arg, num_arg, str_arg, FunctionBody, HarnessCtx, Row, SimTableStore, SimulatedService};
use crate::executor::RawException;
use crate::fitness::ExceptionType;
use crate::schema::{AuthMode, AuthScope, AuthSpec, LoginSpec};

const IDL: &str = include_str!("../../harness/shop.thrift");
pub const STATIC_API_KEY: &str = "static-key-1";
const MAX_PRODUCTS: usize = 20;

pub(super) fn build() -> SimulatedService {
    let bodies: [(&str, FunctionBody); 7] = [
        ("login", login),
        ("addProduct", add_product),
        ("listProducts", list_products),
        ("getProduct", get_product),
        ("placeOrder", place_order),
        ("stockReport", stock_report),
        ("countOrders", count_orders),
    ];
    let mut store = SimTableStore::new();
    store.add_foreign_key("sessions", "users");
    store.add_foreign_key("orders", "products");
    store.set_init_data("users", vec![row(json!({"user": "alice", "password": "secret"}))]);
    let mut s = SimulatedService::new("shop", "store-backed shop with login (7 functions)", IDL, &bodies, store);
    s.default_auth = vec![
        AuthSpec {
            name: "alice".into(),
            mode: AuthMode::Dynamic,
            static_fields: BTreeMap::new(),
            login: Some(LoginSpec {
                interface_id: "ShopService".into(),
                action_name: "login".into(),
                args: vec![json!("alice"), json!("secret")],
                token_extraction_path: "token".into(),
                token_injection_path: "token".into(),
            }),
            scope: AuthScope::AllFunctions,
        },
        AuthSpec {
            name: "api-key".into(),
            mode: AuthMode::Static,
            static_fields: BTreeMap::from([("token".to_string(), json!(STATIC_API_KEY))]),
            login: None,
            scope: AuthScope::Functions(vec!["addProduct".into()]),
        },
    ];
    s
}

fn row(v: Value) -> Row {
    serde_json::from_value(v).expect("object row")
}

fn store_failure(e: super::StoreError) -> RawException {
    RawException::typed("TApplicationException", e.to_string(), ExceptionType::AppInternalError)
}

fn authorized(c: &mut HarnessCtx<'_>) -> Result<bool, RawException> {
    let Some(token) = c.auth.get("token").and_then(Value::as_str).map(str::to_owned) else {
        c.flag("has_token", false);
        return Ok(false);
    };
    c.flag("has_token", true);
    if c.str_eq("api_key", &token, STATIC_API_KEY) {
        return Ok(true);
    }
    let hits = c
        .store
        .select("sessions", |r| r.get("token").and_then(Value::as_str) == Some(&token))
        .map_err(store_failure)?;
    Ok(c.flag("session", !hits.is_empty()))
}

fn order_result(code: i64, status: &str, id: i64, clock: usize) -> Value {
    json!({
        "code": code,
        "status": status,
        "orderId": id,
        "createdTime": format!("2024-01-01T00:{:02}:{:02}", clock / 60 % 60, clock % 60),
    })
}

fn login(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (user, password) = (str_arg(args, 0)?.to_owned(), str_arg(args, 1)?);
    let users = c
        .store
        .select("users", |r| r.get("user").and_then(Value::as_str) == Some(&user))
        .map_err(store_failure)?;
    if !c.flag("known_user", !users.is_empty()) {
        return Ok(json!({"code": 401, "token": ""}));
    }
    let expected = users[0].get("password").and_then(Value::as_str).unwrap_or_default();
    if !c.str_eq("password", password, expected) {
        return Ok(json!({"code": 401, "token": ""}));
    }
    let n = c.store.count("sessions").map_err(store_failure)?;
    let token = format!("tok-{user}-{}", n + 1);
    c.store
        .insert("sessions", row(json!({"user": user, "token": token})))
        .map_err(store_failure)?;
    Ok(json!({"code": 200, "token": token}))
}

fn add_product(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (name, price, stock) = (str_arg(args, 0)?.to_owned(), num_arg(args, 1)?, int_arg(args, 2)?);
    if !authorized(c)? {
        return Ok(order_result(401, "ERROR", -1, 0));
    }
    let n = c.store.count("products").map_err(store_failure)?;
    if c.int("full", n as i64, Ge, MAX_PRODUCTS as i64) {
        return Ok(order_result(503, "SERVICE_ERROR", -1, n));
    }
    let id = n as i64 + 1;
    c.store
        .insert("products", row(json!({"id": id, "name": name, "price": price, "stock": stock})))
        .map_err(store_failure)?;
    Ok(order_result(200, "OK", id, n))
}

fn list_products(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let limit = int_arg(args, 0)?;
    let rows = c.store.select("products", |_| true).map_err(store_failure)?;
    if c.int("limit_zero", limit, Eq, 0) {
        return Ok(json!([]));
    }
    c.flag("nonempty", !rows.is_empty());
    Ok(Value::Array(rows.into_iter().take(limit.max(0) as usize).map(|r| json!(r)).collect()))
}

fn find_product(c: &mut HarnessCtx<'_>, id: i64) -> Result<Option<Row>, RawException> {
    let hits = c
        .store
        .select("products", |r| r.get("id").and_then(Value::as_i64) == Some(id))
        .map_err(store_failure)?;
    Ok(if c.flag("product_exists", !hits.is_empty()) { hits.into_iter().next() } else { None })
}

fn not_found(id: i64) -> RawException {
    RawException::new("NotFound", format!("no product {id}")).with_payload(json!({"message": format!("no product {id}")}))
}

fn get_product(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let id = int_arg(args, 0)?;
    match find_product(c, id)? {
        Some(r) => Ok(json!(r)),
        None => Err(not_found(id)),
    }
}

fn place_order(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (id, quantity) = (int_arg(args, 0)?, int_arg(args, 1)?);
    if !authorized(c)? {
        return Ok(order_result(401, "ERROR", -1, 0));
    }
    let product = find_product(c, id)?.ok_or_else(|| not_found(id))?;
    let stock = product.get("stock").and_then(Value::as_i64).unwrap_or(0);
    let price = product.get("price").and_then(Value::as_f64).unwrap_or(0.0);
    if c.int("over_stock", quantity, Gt, stock) {
        let msg = format!("only {stock} left");
        return Err(RawException::new("QuotaExceeded", msg.clone()).with_payload(json!({"message": msg})));
    }
    if c.num("big_total", price * quantity as f64, Gt, 50_000.0) {
        return Err(RawException::typed(
            "TApplicationException",
            "Internal error processing placeOrder: total overflows ledger",
            ExceptionType::AppInternalError,
        )
        .at("ShopServiceImpl.placeOrder:88"));
    }
    let sold_out = c.int("sold_out", quantity, Eq, stock);
    c.store
        .update(
            "products",
            |r| r.get("id").and_then(Value::as_i64) == Some(id),
            |r| {
                r.insert("stock".into(), json!(stock - quantity));
            },
        )
        .map_err(store_failure)?;
    let n = c.store.count("orders").map_err(store_failure)?;
    c.store
        .insert("orders", row(json!({"id": n + 1, "product": id, "quantity": quantity})))
        .map_err(store_failure)?;
    Ok(order_result(200, if sold_out { "SOLD_OUT" } else { "OK" }, n as i64 + 1, n))
}

fn stock_report(c: &mut HarnessCtx<'_>, _args: &[Value]) -> Result<Value, RawException> {
    let rows = c.store.select("products", |_| true).map_err(store_failure)?;
    let mut report = serde_json::Map::new();
    for r in rows {
        let name = r.get("name").and_then(Value::as_str).unwrap_or_default().to_owned();
        let stock = r.get("stock").cloned().unwrap_or(json!(0));
        report.insert(name, stock);
    }
    c.flag("any_stock", !report.is_empty());
    Ok(Value::Object(report))
}

fn count_orders(c: &mut HarnessCtx<'_>, _args: &[Value]) -> Result<Value, RawException> {
    let n = c.store.count("orders").map_err(store_failure)?;
    c.int("has_orders", n as i64, Gt, 0);
    Ok(json!(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::RawOutcome;

    fn call(s: &mut SimulatedService, action: &str, args: Value, auth: &BTreeMap<String, Value>) -> RawOutcome {
        s.invoke(action, args.as_array().unwrap(), auth).outcome
    }

    #[test]
    fn order_needs_existing_product() {
        let mut s = build();
        let auth = BTreeMap::from([("token".to_string(), json!(STATIC_API_KEY))]);
        let RawOutcome::Raised(e) = call(&mut s, "placeOrder", json!([1, 1]), &auth) else { panic!() };
        assert_eq!(e.name, "NotFound");
        call(&mut s, "addProduct", json!(["pen", 2.5, 3]), &auth);
        let RawOutcome::Returned(Some(v)) = call(&mut s, "placeOrder", json!([1, 1]), &auth) else { panic!() };
        assert_eq!(v["status"], "OK");
        let RawOutcome::Raised(e) = call(&mut s, "placeOrder", json!([1, 5]), &auth) else { panic!() };
        assert_eq!(e.name, "QuotaExceeded");
    }

    #[test]
    fn login_issues_session_tokens() {
        let mut s = build();
        let none = BTreeMap::new();
        let RawOutcome::Returned(Some(v)) = call(&mut s, "login", json!(["alice", "secret"]), &none) else { panic!() };
        assert_eq!(v["token"], "tok-alice-1");
        let auth = BTreeMap::from([("token".to_string(), v["token"].clone())]);
        let RawOutcome::Returned(Some(v)) = call(&mut s, "addProduct", json!(["pen", 1.0, 1]), &auth) else { panic!() };
        assert_eq!(v["code"], 200);
        let RawOutcome::Returned(Some(v)) = call(&mut s, "addProduct", json!(["pen", 1.0, 1]), &none) else { panic!() };
        assert_eq!(v["code"], 401);
    }
}
