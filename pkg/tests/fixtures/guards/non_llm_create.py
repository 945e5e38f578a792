from twilio.rest import Client

db = Database()
client = Client(account_sid, auth_token)


def handler(user_id, body):
    record = db.records.create(owner=user_id, body=body)
    client.messages.create(body=body, to=record.phone, from_="+15550100")
    return record
