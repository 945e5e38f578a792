from openai import OpenAI

client = OpenAI()

def get_response(user_session_id, prompt):
    response = client.chat.completions.create(
        model="gpt-4o",
        messages=[{"role": "user", "content": prompt}],
        temperature=0.7,
        user=user_session_id # Traceability: Link execution to the specific user
    )
    return response.choices[0].message.content
